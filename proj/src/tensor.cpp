#include "hatesense/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hatesense {

namespace {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

void check_shape(const Shape& shape) {
  if (shape.empty()) {
    throw std::invalid_argument("tensor shape must have at least one extent");
  }
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw std::invalid_argument("tensor extents must be positive, got " +
                                  shape_to_string(shape));
    }
  }
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a,
                              const Shape& b) {
  throw std::invalid_argument(op + ": shape mismatch " + shape_to_string(a) +
                              " vs " + shape_to_string(b));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a rank-2 tensor, got " +
                                shape_to_string(t.shape()));
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

Tensor Tensor::wrap(Shape shape, std::vector<double> data) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  const std::size_t n = shape_numel(shape);
  Tensor t = wrap(std::move(shape), std::vector<double>(n, 0.0));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, double value) {
  check_shape(shape);
  const std::size_t n = shape_numel(shape);
  return wrap(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument(
        "from_data: shape " + shape_to_string(shape) + " needs " +
        std::to_string(shape_numel(shape)) + " values, got " +
        std::to_string(data.size()));
  }
  Tensor t = wrap(std::move(shape), std::move(data));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

std::size_t Tensor::rows() const {
  if (ndim() != 2) {
    throw std::logic_error("rows(): tensor is not rank-2, shape " +
                           shape_to_string(shape()));
  }
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  if (ndim() != 2) {
    throw std::logic_error("cols(): tensor is not rank-2, shape " +
                           shape_to_string(shape()));
  }
  return impl_->shape[1];
}

double Tensor::value() const {
  if (size() != 1) {
    throw std::logic_error("value(): tensor is not scalar, shape " +
                           shape_to_string(shape()));
  }
  return impl_->data[0];
}

void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::clone() const {
  Tensor t = wrap(impl_->shape, impl_->data);
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

void Tape::reset() {
  records_.clear();
  backward_run_ = false;
}

void Tape::record(std::function<void()> fn) {
  records_.push_back(std::move(fn));
}

bool Tape::any_tracked(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs) {
    if (t->tracked()) return true;
  }
  return false;
}

Tensor Tape::make_output(Shape shape, std::vector<double> data, bool track) {
  Tensor out = Tensor::wrap(std::move(shape), std::move(data));
  out.impl_->tracked = track && recording_;
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.valid() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  if (!loss.tracked()) {
    throw std::invalid_argument(
        "backward: loss is not connected to this tape (detached or recording "
        "was off)");
  }
  if (backward_run_) {
    throw std::logic_error(
        "backward: tape already replayed; reset() and zero gradients before "
        "accumulating again");
  }
  backward_run_ = true;
  loss.grad()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

// Each op below computes the forward value eagerly and, when any input is
// tracked, records a closure that accumulates exact adjoints into the
// inputs' grad buffers. Closures skip inputs that are not tracked and
// outputs whose grad was never touched.

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_error("matmul", a.shape(), b.shape());

  std::vector<double> out(m * n, 0.0);
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = da[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &db[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  const bool track = any_tracked({&a, &b});
  Tensor c = make_output({m, n}, std::move(out), track);
  if (c.tracked()) {
    record([a, b, c, m, k, n]() {
      if (!c.has_grad()) return;
      const auto& gc = c.grad();
      if (a.tracked()) {
        auto& ga = a.grad();
        const auto& vb = b.data();
        // dA = dC . B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* gcrow = &gc[i * n];
            const double* brow = &vb[p * n];
            for (std::size_t j = 0; j < n; ++j) acc += gcrow[j] * brow[j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        const auto& va = a.data();
        // dB = A^T . dC
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t i = 0; i < m; ++i) {
            const double av = va[i * k + p];
            if (av == 0.0) continue;
            const double* gcrow = &gc[i * n];
            double* gbrow = &gb[p * n];
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * gcrow[j];
          }
        }
      }
    });
  }
  return c;
}

Tensor Tape::transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.at(i, j);
  Tensor t = make_output({n, m}, std::move(out), a.tracked());
  if (t.tracked()) {
    record([a, t, m, n]() {
      if (!t.has_grad() || !a.tracked()) return;
      const auto& gt = t.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += gt[j * m + i];
    });
  }
  return t;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  Tensor c = make_output(a.shape(), std::move(out), any_tracked({&a, &b}));
  if (c.tracked()) {
    record([a, b, c]() {
      if (!c.has_grad()) return;
      const auto& gc = c.grad();
      if (a.tracked()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += gc[i];
      }
    });
  }
  return c;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  Tensor c = make_output(a.shape(), std::move(out), any_tracked({&a, &b}));
  if (c.tracked()) {
    record([a, b, c]() {
      if (!c.has_grad()) return;
      const auto& gc = c.grad();
      if (a.tracked()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] -= gc[i];
      }
    });
  }
  return c;
}

Tensor Tape::add_rowvec(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_rowvec");
  require_rank2(bias, "add_rowvec");
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    shape_error("add_rowvec", x.shape(), bias.shape());
  }
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.at(i, j) + bias.at(j);
  Tensor c = make_output({n, d}, std::move(out), any_tracked({&x, &bias}));
  if (c.tracked()) {
    record([x, bias, c, n, d]() {
      if (!c.has_grad()) return;
      const auto& gc = c.grad();
      if (x.tracked()) {
        auto& gx = x.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gx[i] += gc[i];
      }
      if (bias.tracked()) {
        auto& gb = bias.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gb[j] += gc[i * d + j];
      }
    });
  }
  return c;
}

Tensor Tape::scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
  Tensor c = make_output(a.shape(), std::move(out), a.tracked());
  if (c.tracked()) {
    record([a, c, factor]() {
      if (!c.has_grad() || !a.tracked()) return;
      const auto& gc = c.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += factor * gc[i];
    });
  }
  return c;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  Tensor c = make_output(a.shape(), std::move(out), any_tracked({&a, &b}));
  if (c.tracked()) {
    record([a, b, c]() {
      if (!c.has_grad()) return;
      const auto& gc = c.grad();
      if (a.tracked()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += b.at(i) * gc[i];
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += a.at(i) * gc[i];
      }
    });
  }
  return c;
}

Tensor Tape::softmax(const Tensor& x, std::size_t axis) {
  if (x.ndim() > 2 || axis >= x.ndim()) {
    throw std::invalid_argument("softmax: unsupported axis " +
                                std::to_string(axis) + " for shape " +
                                shape_to_string(x.shape()));
  }
  // Lines run along `axis`; iterate every line, max-shift for stability.
  const bool rank1 = x.ndim() == 1;
  const std::size_t line_len = rank1 ? x.shape()[0] : x.shape()[axis];
  const std::size_t n_lines = x.size() / line_len;
  const std::size_t stride =
      rank1 ? 1 : (axis == 1 ? 1 : x.cols());
  // Base offset of line l: for axis=1 lines are rows (base l*cols);
  // for axis=0 lines are columns (base l).
  const std::size_t line_base = rank1 ? 0 : (axis == 1 ? x.cols() : 1);

  std::vector<double> out(x.size());
  for (std::size_t l = 0; l < n_lines; ++l) {
    const std::size_t base = l * line_base;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < line_len; ++i)
      mx = std::max(mx, x.at(base + i * stride));
    double total = 0.0;
    for (std::size_t i = 0; i < line_len; ++i) {
      const double e = std::exp(x.at(base + i * stride) - mx);
      out[base + i * stride] = e;
      total += e;
    }
    for (std::size_t i = 0; i < line_len; ++i) out[base + i * stride] /= total;
  }
  Tensor y = make_output(x.shape(), std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y, n_lines, line_len, stride, line_base]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      const auto& vy = y.data();
      auto& gx = x.grad();
      for (std::size_t l = 0; l < n_lines; ++l) {
        const std::size_t base = l * line_base;
        double dot = 0.0;
        for (std::size_t i = 0; i < line_len; ++i) {
          const std::size_t idx = base + i * stride;
          dot += gy[idx] * vy[idx];
        }
        for (std::size_t i = 0; i < line_len; ++i) {
          const std::size_t idx = base + i * stride;
          gx[idx] += vy[idx] * (gy[idx] - dot);
        }
      }
    });
  }
  return y;
}

Tensor Tape::log(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (x.at(i) <= 0.0) {
      throw std::domain_error("log: input must be positive, got " +
                              std::to_string(x.at(i)));
    }
    out[i] = std::log(x.at(i));
  }
  Tensor y = make_output(x.shape(), std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] / x.at(i);
    });
  }
  return y;
}

Tensor Tape::gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.at(i);
    out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  Tensor y = make_output(x.shape(), std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) {
        const double v = x.at(i);
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        gx[i] += gy[i] * (cdf + v * pdf);
      }
    });
  }
  return y;
}

Tensor Tape::relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.at(i));
  Tensor y = make_output(x.shape(), std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i)
        if (x.at(i) > 0.0) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain,
                        const Tensor& offset) {
  require_rank2(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (gain.ndim() != 2 || gain.rows() != 1 || gain.cols() != d) {
    shape_error("layer_norm(gain)", x.shape(), gain.shape());
  }
  if (offset.shape() != gain.shape()) {
    shape_error("layer_norm(offset)", gain.shape(), offset.shape());
  }
  std::vector<double> out(n * d);
  std::vector<double> inv_sigma(n);
  std::vector<double> normalized(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x.at(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_sigma[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (x.at(i, j) - mean) * inv;
      normalized[i * d + j] = z;
      out[i * d + j] = gain.at(j) * z + offset.at(j);
    }
  }
  Tensor y =
      make_output({n, d}, std::move(out), any_tracked({&x, &gain, &offset}));
  if (y.tracked()) {
    record([x, gain, offset, y, n, d, inv_sigma = std::move(inv_sigma),
            normalized = std::move(normalized)]() {
      if (!y.has_grad()) return;
      const auto& gy = y.grad();
      if (gain.tracked()) {
        auto& gg = gain.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j)
            gg[j] += gy[i * d + j] * normalized[i * d + j];
      }
      if (offset.tracked()) {
        auto& gb = offset.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gb[j] += gy[i * d + j];
      }
      if (x.tracked()) {
        auto& gx = x.grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < n; ++i) {
          double mean_t = 0.0, mean_tz = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double t = gy[i * d + j] * gain.at(j);
            mean_t += t;
            mean_tz += t * normalized[i * d + j];
          }
          mean_t *= inv_d;
          mean_tz *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double t = gy[i * d + j] * gain.at(j);
            gx[i * d + j] += inv_sigma[i] * (t - mean_t -
                                             normalized[i * d + j] * mean_tz);
          }
        }
      }
    });
  }
  return y;
}

Tensor Tape::row_gather(const Tensor& x, const std::vector<std::size_t>& rows) {
  require_rank2(x, "row_gather");
  if (rows.empty()) {
    throw std::invalid_argument("row_gather: empty index list");
  }
  const std::size_t d = x.cols();
  for (std::size_t r : rows) {
    if (r >= x.rows()) {
      throw std::out_of_range("row_gather: index " + std::to_string(r) +
                              " out of range for " + std::to_string(x.rows()) +
                              " rows");
    }
  }
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.at(rows[i], j);
  Tensor y = make_output({rows.size(), d}, std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y, rows, d]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
          gx[rows[i] * d + j] += gy[i * d + j];
    });
  }
  return y;
}

Tensor Tape::embedding_lookup(const Tensor& table,
                              const std::vector<std::size_t>& ids) {
  for (std::size_t id : ids) {
    if (id >= table.rows()) {
      throw std::out_of_range("embedding_lookup: id " + std::to_string(id) +
                              " >= vocabulary size " +
                              std::to_string(table.rows()));
    }
  }
  return row_gather(table, ids);
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw std::invalid_argument("concat_rows: no parts");
  }
  const std::size_t d = parts.front().cols();
  std::size_t total = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != d) shape_error("concat_rows", parts.front().shape(), p.shape());
    total += p.rows();
    track = track || p.tracked();
  }
  std::vector<double> out;
  out.reserve(total * d);
  for (const Tensor& p : parts)
    out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor y = make_output({total, d}, std::move(out), track);
  if (y.tracked()) {
    record([parts, y, d]() {
      if (!y.has_grad()) return;
      const auto& gy = y.grad();
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        const std::size_t count = p.rows() * d;
        if (p.tracked()) {
          auto& gp = p.grad();
          for (std::size_t i = 0; i < count; ++i) gp[i] += gy[offset + i];
        }
        offset += count;
      }
    });
  }
  return y;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw std::invalid_argument("concat_cols: no parts");
  }
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != n) shape_error("concat_cols", parts.front().shape(), p.shape());
    total += p.cols();
    track = track || p.tracked();
  }
  std::vector<double> out(n * total);
  std::size_t col_offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out[i * total + col_offset + j] = p.at(i, j);
    col_offset += w;
  }
  Tensor y = make_output({n, total}, std::move(out), track);
  if (y.tracked()) {
    record([parts, y, n, total]() {
      if (!y.has_grad()) return;
      const auto& gy = y.grad();
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        const std::size_t w = p.cols();
        if (p.tracked()) {
          auto& gp = p.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j)
              gp[i * w + j] += gy[i * total + offset + j];
        }
        offset += w;
      }
    });
  }
  return y;
}

Tensor Tape::col_slice(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank2(x, "col_slice");
  if (count == 0 || start + count > x.cols()) {
    throw std::out_of_range("col_slice: range [" + std::to_string(start) +
                            ", " + std::to_string(start + count) +
                            ") out of " + std::to_string(x.cols()) +
                            " columns");
  }
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> out(n * count);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j)
      out[i * count + j] = x.at(i, start + j);
  Tensor y = make_output({n, count}, std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y, start, count, n, d]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < count; ++j)
          gx[i * d + start + j] += gy[i * count + j];
    });
  }
  return y;
}

Tensor Tape::mean_rows(const Tensor& x) {
  require_rank2(x, "mean_rows");
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += x.at(i, j);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= inv_n;
  Tensor y = make_output({1, d}, std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y, n, d, inv_n]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += gy[j] * inv_n;
    });
  }
  return y;
}

MaxPoolResult Tape::max_pool_over_time(const Tensor& x) {
  require_rank2(x, "max_pool_over_time");
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> out(d);
  std::vector<std::size_t> argmax(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    double best = x.at(0, j);
    std::size_t best_i = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (x.at(i, j) > best) {  // ties keep the lowest row index
        best = x.at(i, j);
        best_i = i;
      }
    }
    out[j] = best;
    argmax[j] = best_i;
  }
  Tensor y = make_output({1, d}, std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y, argmax, d]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t j = 0; j < d; ++j)
        gx[argmax[j] * x.cols() + j] += gy[j];
    });
  }
  return {y, std::move(argmax)};
}

Tensor Tape::cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.ndim() != 1 || v.ndim() != 1 || u.size() != v.size()) {
    shape_error("cosine_similarity", u.shape(), v.shape());
  }
  const std::size_t d = u.size();
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    dot += u.at(i) * v.at(i);
    nu += u.at(i) * u.at(i);
    nv += v.at(i) * v.at(i);
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  const double a = std::max(nu, kNormEpsilon);
  const double b = std::max(nv, kNormEpsilon);
  const double c = dot / (a * b);
  Tensor y = make_output({1}, {c}, any_tracked({&u, &v}));
  if (y.tracked()) {
    record([u, v, y, d, a, b, nu, nv, c]() {
      if (!y.has_grad()) return;
      const double g = y.grad()[0];
      if (u.tracked()) {
        auto& gu = u.grad();
        const double inv = 1.0 / (a * b);
        const double self = nu > kNormEpsilon ? c / (a * a) : 0.0;
        for (std::size_t i = 0; i < d; ++i)
          gu[i] += g * (v.at(i) * inv - self * u.at(i));
      }
      if (v.tracked()) {
        auto& gv = v.grad();
        const double inv = 1.0 / (a * b);
        const double self = nv > kNormEpsilon ? c / (b * b) : 0.0;
        for (std::size_t i = 0; i < d; ++i)
          gv[i] += g * (u.at(i) * inv - self * v.at(i));
      }
    });
  }
  return y;
}

Tensor Tape::cosine_matrix(const Tensor& a, const Tensor& b) {
  require_rank2(a, "cosine_matrix");
  require_rank2(b, "cosine_matrix");
  if (a.cols() != b.cols()) shape_error("cosine_matrix", a.shape(), b.shape());
  const std::size_t n = a.rows(), k = b.rows(), d = a.cols();
  std::vector<double> na(n), nb(k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a.at(i, j) * a.at(i, j);
    na[i] = std::sqrt(s);
  }
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += b.at(i, j) * b.at(i, j);
    nb[i] = std::sqrt(s);
  }
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double fa = std::max(na[i], kNormEpsilon);
    for (std::size_t p = 0; p < k; ++p) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += a.at(i, j) * b.at(p, j);
      out[i * k + p] = dot / (fa * std::max(nb[p], kNormEpsilon));
    }
  }
  Tensor y = make_output({n, k}, std::move(out), any_tracked({&a, &b}));
  if (y.tracked()) {
    record([a, b, y, n, k, d, na = std::move(na), nb = std::move(nb)]() {
      if (!y.has_grad()) return;
      const auto& gy = y.grad();
      const auto& vy = y.data();
      for (std::size_t i = 0; i < n; ++i) {
        const double fa = std::max(na[i], kNormEpsilon);
        const bool a_live = na[i] > kNormEpsilon;
        for (std::size_t p = 0; p < k; ++p) {
          const double g = gy[i * k + p];
          if (g == 0.0) continue;
          const double fb = std::max(nb[p], kNormEpsilon);
          const double c = vy[i * k + p];
          const double inv = 1.0 / (fa * fb);
          if (a.tracked()) {
            auto& ga = a.grad();
            const double self = a_live ? c / (fa * fa) : 0.0;
            for (std::size_t j = 0; j < d; ++j)
              ga[i * d + j] += g * (b.at(p, j) * inv - self * a.at(i, j));
          }
          if (b.tracked()) {
            auto& gb = b.grad();
            const double self = nb[p] > kNormEpsilon ? c / (fb * fb) : 0.0;
            for (std::size_t j = 0; j < d; ++j)
              gb[p * d + j] += g * (a.at(i, j) * inv - self * b.at(p, j));
          }
        }
      }
    });
  }
  return y;
}

Tensor Tape::cross_entropy_with_logits(const Tensor& logits,
                                       std::size_t target) {
  const bool rank2 = logits.ndim() == 2;
  if (rank2 && logits.rows() != 1) {
    throw std::invalid_argument(
        "cross_entropy_with_logits: expected a single logit row, got " +
        shape_to_string(logits.shape()));
  }
  const std::size_t k = rank2 ? logits.cols() : logits.size();
  if (target >= k) {
    throw std::out_of_range("cross_entropy_with_logits: target " +
                            std::to_string(target) + " out of range for " +
                            std::to_string(k) + " classes");
  }
  double mx = logits.at(0);
  for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, logits.at(i));
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += std::exp(logits.at(i) - mx);
  const double lse = mx + std::log(total);
  Tensor y = make_output({1}, {lse - logits.at(target)}, logits.tracked());
  if (y.tracked()) {
    record([logits, y, k, target, mx, total]() {
      if (!y.has_grad() || !logits.tracked()) return;
      const double g = y.grad()[0];
      auto& gl = logits.grad();
      for (std::size_t i = 0; i < k; ++i) {
        const double p = std::exp(logits.at(i) - mx) / total;
        gl[i] += g * (p - (i == target ? 1.0 : 0.0));
      }
    });
  }
  return y;
}

Tensor Tape::l1_norm(const Tensor& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(x.at(i));
  Tensor y = make_output({1}, {total}, x.tracked());
  if (y.tracked()) {
    record([x, y]() {
      if (!y.has_grad() || !x.tracked()) return;
      const double g = y.grad()[0];
      auto& gx = x.grad();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x.at(i) > 0.0) gx[i] += g;
        else if (x.at(i) < 0.0) gx[i] -= g;
      }
    });
  }
  return y;
}

Tensor Tape::sum(const Tensor& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += x.at(i);
  Tensor y = make_output({1}, {total}, x.tracked());
  if (y.tracked()) {
    record([x, y]() {
      if (!y.has_grad() || !x.tracked()) return;
      const double g = y.grad()[0];
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

Tensor Tape::mean(const Tensor& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += x.at(i);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  Tensor y = make_output({1}, {total * inv_n}, x.tracked());
  if (y.tracked()) {
    record([x, y, inv_n]() {
      if (!y.has_grad() || !x.tracked()) return;
      const double g = y.grad()[0] * inv_n;
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

Tensor Tape::pick(const Tensor& x, std::size_t flat_index) {
  if (flat_index >= x.size()) {
    throw std::out_of_range("pick: index " + std::to_string(flat_index) +
                            " out of range for " + std::to_string(x.size()) +
                            " elements");
  }
  Tensor y = make_output({1}, {x.at(flat_index)}, x.tracked());
  if (y.tracked()) {
    record([x, y, flat_index]() {
      if (!y.has_grad() || !x.tracked()) return;
      x.grad()[flat_index] += y.grad()[0];
    });
  }
  return y;
}

Tensor Tape::dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " +
                                std::to_string(rate));
  }
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * mask[i];
  Tensor y = make_output(x.shape(), std::move(out), x.tracked());
  if (y.tracked()) {
    record([x, y, mask = std::move(mask)]() {
      if (!y.has_grad() || !x.tracked()) return;
      const auto& gy = y.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

}  // namespace hatesense
