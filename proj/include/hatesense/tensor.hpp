#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hatesense/rng.hpp"

namespace hatesense {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

// Dense row-major tensor of doubles. Copying a Tensor copies the handle,
// not the storage; clone() makes a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool valid() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  // Scalar extraction; requires size() == 1.
  double value() const;
  double at(std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t i, std::size_t j) const {
    return impl_->data[i * cols() + j];
  }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value);
  // True when the tensor participates in a recorded computation.
  bool tracked() const {
    return impl_ && (impl_->tracked || impl_->requires_grad);
  }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  // Gradient buffer, same shape as data, allocated zero-filled on demand.
  // Tensor is a shared handle, so the buffer is writable through a const
  // handle, matching data()/shared_ptr semantics.
  std::vector<double>& grad() const;
  void zero_grad();

  bool all_finite() const;
  Tensor clone() const;

  bool same_storage(const Tensor& other) const {
    return impl_ == other.impl_;
  }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool tracked = false;
  };
  std::shared_ptr<Impl> impl_;

  static Tensor wrap(Shape shape, std::vector<double> data);
  friend class Tape;
};

struct MaxPoolResult {
  Tensor values;                    // [1 x d]
  std::vector<std::size_t> argmax;  // row index of the max per column
};

// Records the forward pass of every differentiable operation and replays
// exact adjoints in reverse. One tape per logical thread; backward() may be
// called once per recording (reset() re-arms it, gradients are not merged
// across calls).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  void set_recording(bool value) { recording_ = value; }
  std::size_t num_records() const { return records_.size(); }
  void reset();

  void backward(const Tensor& loss);

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  // x: [n x d], bias: [1 x d]; bias is added to every row.
  Tensor add_rowvec(const Tensor& x, const Tensor& bias);
  Tensor scale(const Tensor& a, double factor);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor softmax(const Tensor& x, std::size_t axis);
  Tensor log(const Tensor& x);
  Tensor gelu(const Tensor& x);
  Tensor relu(const Tensor& x);
  // Normalizes each row of x over the last axis; gain/offset are [1 x d].
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset);
  Tensor embedding_lookup(const Tensor& table,
                          const std::vector<std::size_t>& ids);
  Tensor row_gather(const Tensor& x, const std::vector<std::size_t>& rows);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor col_slice(const Tensor& x, std::size_t start, std::size_t count);
  Tensor mean_rows(const Tensor& x);
  // Per-column max over rows with argmax indices for adjoint routing.
  MaxPoolResult max_pool_over_time(const Tensor& x);
  Tensor cosine_similarity(const Tensor& u, const Tensor& v);
  // a: [n x d], b: [k x d] -> [n x k] of cosines between rows.
  Tensor cosine_matrix(const Tensor& a, const Tensor& b);
  Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t target);
  Tensor l1_norm(const Tensor& x);
  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);
  Tensor pick(const Tensor& x, std::size_t flat_index);
  // Inverted dropout; identity when rate == 0.
  Tensor dropout(const Tensor& x, double rate, Rng& rng);

  // Norm floor shared by the cosine operations: a (near-)zero vector is
  // treated as having norm kNormEpsilon, so cos against it is 0, not NaN.
  static constexpr double kNormEpsilon = 1e-12;
  static constexpr double kLayerNormEpsilon = 1e-5;

 private:
  void record(std::function<void()> fn);
  Tensor make_output(Shape shape, std::vector<double> data, bool track);
  static bool any_tracked(std::initializer_list<const Tensor*> inputs);

  std::vector<std::function<void()>> records_;
  bool recording_ = true;
  bool backward_run_ = false;
};

}  // namespace hatesense
