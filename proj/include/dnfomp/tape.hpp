#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dnfomp/common.hpp"

// Reverse-mode automatic differentiation over an append-only tape.
//
// Two node flavors share one graph: scalar nodes (Var) carry their value and
// the local partials of the recording primitive; tensor nodes (Mat) carry a
// row-major Tensor and are differentiated by op-specific backward rules built
// on the kernels layer. The scalar primitive set covers every trajectory loss
// term; the fused tensor ops (pack / affine / relu / mean reductions) cover
// the MLP so one backward pass yields gradients for both network parameters
// and trajectory variables.
//
// A tape is single-owner: no internal synchronization. backward() may be
// called repeatedly; adjoints are recomputed from scratch each time.

namespace dnfomp::ad {

class Tape;

class Var {
 public:
  Var() = default;
  double value() const;
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return idx_; }

 private:
  friend class Tape;
  Var(Tape* t, std::uint32_t i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  std::uint32_t idx_ = 0;
};

class Mat {
 public:
  Mat() = default;
  const Tensor& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return idx_; }

 private:
  friend class Tape;
  Mat(Tape* t, std::uint32_t i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  std::uint32_t idx_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- graph construction ---------------------------------------------------

  /// Scalar leaf that participates in gradients.
  Var leaf(double v);
  /// Scalar constant (gradient not tracked through it).
  Var constant(double v);
  Mat tensor_leaf(Tensor t, bool requires_grad);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var square(Var a);
  Var sqrt(Var a);  // domain error on negative input
  Var relu(Var a);  // subgradient 0 at the kink
  Var softplus(Var a);
  Var sin(Var a);
  Var cos(Var a);
  Var atan2(Var y, Var x);
  Var bce_with_logits(Var logit, Var label);

  /// Row-major pack of rows*cols scalars into a tensor node. Gradients
  /// scatter back to each scalar.
  Mat pack(std::size_t rows, std::size_t cols, std::span<const Var> elems);
  /// Y = W * X + b with b broadcast over columns. W: r x k, X: k x c, b: r x 1.
  Mat affine(Mat w, Mat x, Mat b);
  Mat relu(Mat x);
  /// Mean of elementwise softplus over all entries -> scalar.
  Var mean_softplus(Mat z);
  /// Mean BCE-with-logits over all entries -> scalar. Shapes must match.
  Var mean_bce_with_logits(Mat logits, Mat labels);
  /// 1x1 tensor -> scalar.
  Var item(Mat m);

  // -- differentiation ------------------------------------------------------

  /// Reverse sweep from a scalar root. Fills the gradient map; every leaf
  /// not reachable from the root keeps gradient zero.
  void backward(Var root);

  double grad(Var v) const;
  const Tensor& grad(Mat m) const;

  // -- lifecycle ------------------------------------------------------------

  /// Drop all nodes, keep capacity. Handles from before reset are invalid.
  void reset();
  std::size_t node_count() const { return nodes_.size(); }

  double value_of(const Var& v) const;
  const Tensor& value_of(const Mat& m) const;

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kSquare,
    kSqrt,
    kRelu,
    kSoftplus,
    kBce,
    kSin,
    kCos,
    kAtan2,
    kTensorLeaf,
    kPack,
    kAffine,
    kReluT,
    kMeanSoftplus,
    kMeanBce,
    kItem,
  };

  struct Node {
    Op op = Op::kLeaf;
    bool requires_grad = false;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint32_t c = 0;  // bias operand of kAffine
    double val = 0.0;     // scalar nodes only
    double pa = 0.0;      // d val / d operand a
    double pb = 0.0;      // d val / d operand b
    std::int32_t ten = -1;            // tensor slot, or -1 for scalars
    std::uint32_t args_pos = 0;       // kPack operand list
    std::uint32_t args_len = 0;
  };

  friend class Var;
  friend class Mat;

  Var push_scalar(Op op, double val, std::uint32_t a, std::uint32_t b,
                  double pa, double pb, bool requires_grad);
  Mat push_tensor(Op op, Tensor value, std::uint32_t a, std::uint32_t b,
                  std::uint32_t c, bool requires_grad);
  void check_owns(const Var& v) const;
  void check_owns(const Mat& m) const;
  bool rg(std::uint32_t idx) const { return nodes_[idx].requires_grad; }

  std::vector<Node> nodes_;
  std::vector<Tensor> tensors_;
  std::vector<std::uint32_t> args_;
  std::vector<double> adj_;
  std::vector<Tensor> tadj_;
  bool has_grads_ = false;
};

// Operator sugar; mixed Var/double forms wrap the double as a constant.
inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape()->div(a, b); }
inline Var operator-(Var a) { return a.tape()->neg(a); }
inline Var operator+(Var a, double b) { return a + a.tape()->constant(b); }
inline Var operator+(double a, Var b) { return b.tape()->constant(a) + b; }
inline Var operator-(Var a, double b) { return a - a.tape()->constant(b); }
inline Var operator-(double a, Var b) { return b.tape()->constant(a) - b; }
inline Var operator*(Var a, double b) { return a * a.tape()->constant(b); }
inline Var operator*(double a, Var b) { return b.tape()->constant(a) * b; }
inline Var operator/(Var a, double b) { return a / a.tape()->constant(b); }
inline Var operator/(double a, Var b) { return b.tape()->constant(a) / b; }

}  // namespace dnfomp::ad
