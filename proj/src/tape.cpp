#include "dnfomp/tape.hpp"

#include <cmath>

#include "dnfomp/kernels.hpp"

namespace dnfomp::ad {

namespace {

void ensure_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::domain_error(std::string("non-finite value recorded on tape: ") + what);
  }
}

}  // namespace

double Var::value() const { return tape_->value_of(*this); }

const Tensor& Mat::value() const { return tape_->value_of(*this); }

double Tape::value_of(const Var& v) const {
  check_owns(v);
  return nodes_[v.idx_].val;
}

const Tensor& Tape::value_of(const Mat& m) const {
  check_owns(m);
  return tensors_[nodes_[m.idx_].ten];
}

void Tape::check_owns(const Var& v) const {
  if (v.tape() != this) {
    throw InvalidInputError("Var belongs to a different tape");
  }
}

void Tape::check_owns(const Mat& m) const {
  if (m.tape() != this) {
    throw InvalidInputError("Mat belongs to a different tape");
  }
}

Var Tape::push_scalar(Op op, double val, std::uint32_t a, std::uint32_t b,
                      double pa, double pb, bool requires_grad) {
  ensure_finite(val, "scalar node");
  Node n;
  n.op = op;
  n.requires_grad = requires_grad;
  n.a = a;
  n.b = b;
  n.val = val;
  n.pa = pa;
  n.pb = pb;
  nodes_.push_back(n);
  has_grads_ = false;
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Mat Tape::push_tensor(Op op, Tensor value, std::uint32_t a, std::uint32_t b,
                      std::uint32_t c, bool requires_grad) {
  Node n;
  n.op = op;
  n.requires_grad = requires_grad;
  n.a = a;
  n.b = b;
  n.c = c;
  n.ten = static_cast<std::int32_t>(tensors_.size());
  tensors_.push_back(std::move(value));
  nodes_.push_back(n);
  has_grads_ = false;
  return Mat(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::leaf(double v) { return push_scalar(Op::kLeaf, v, 0, 0, 0, 0, true); }

Var Tape::constant(double v) {
  return push_scalar(Op::kLeaf, v, 0, 0, 0, 0, false);
}

Mat Tape::tensor_leaf(Tensor t, bool requires_grad) {
  if (!t.all_finite()) {
    throw std::domain_error("non-finite tensor leaf");
  }
  return push_tensor(Op::kTensorLeaf, std::move(t), 0, 0, 0, requires_grad);
}

Var Tape::add(Var a, Var b) {
  check_owns(a);
  check_owns(b);
  const double va = nodes_[a.idx_].val, vb = nodes_[b.idx_].val;
  return push_scalar(Op::kAdd, va + vb, a.idx_, b.idx_, 1.0, 1.0,
                     rg(a.idx_) || rg(b.idx_));
}

Var Tape::sub(Var a, Var b) {
  check_owns(a);
  check_owns(b);
  const double va = nodes_[a.idx_].val, vb = nodes_[b.idx_].val;
  return push_scalar(Op::kSub, va - vb, a.idx_, b.idx_, 1.0, -1.0,
                     rg(a.idx_) || rg(b.idx_));
}

Var Tape::mul(Var a, Var b) {
  check_owns(a);
  check_owns(b);
  const double va = nodes_[a.idx_].val, vb = nodes_[b.idx_].val;
  return push_scalar(Op::kMul, va * vb, a.idx_, b.idx_, vb, va,
                     rg(a.idx_) || rg(b.idx_));
}

Var Tape::div(Var a, Var b) {
  check_owns(a);
  check_owns(b);
  const double va = nodes_[a.idx_].val, vb = nodes_[b.idx_].val;
  return push_scalar(Op::kDiv, va / vb, a.idx_, b.idx_, 1.0 / vb,
                     -va / (vb * vb), rg(a.idx_) || rg(b.idx_));
}

Var Tape::neg(Var a) {
  check_owns(a);
  return push_scalar(Op::kNeg, -nodes_[a.idx_].val, a.idx_, 0, -1.0, 0.0,
                     rg(a.idx_));
}

Var Tape::square(Var a) {
  check_owns(a);
  const double va = nodes_[a.idx_].val;
  return push_scalar(Op::kSquare, va * va, a.idx_, 0, 2.0 * va, 0.0,
                     rg(a.idx_));
}

Var Tape::sqrt(Var a) {
  check_owns(a);
  const double va = nodes_[a.idx_].val;
  if (va < 0.0) {
    throw std::domain_error("sqrt of negative value on tape");
  }
  const double r = std::sqrt(va);
  return push_scalar(Op::kSqrt, r, a.idx_, 0, 0.5 / r, 0.0, rg(a.idx_));
}

Var Tape::relu(Var a) {
  check_owns(a);
  const double va = nodes_[a.idx_].val;
  return push_scalar(Op::kRelu, va > 0.0 ? va : 0.0, a.idx_, 0,
                     va > 0.0 ? 1.0 : 0.0, 0.0, rg(a.idx_));
}

Var Tape::softplus(Var a) {
  check_owns(a);
  const double va = nodes_[a.idx_].val;
  return push_scalar(Op::kSoftplus, stable_softplus(va), a.idx_, 0,
                     sigmoid(va), 0.0, rg(a.idx_));
}

Var Tape::sin(Var a) {
  check_owns(a);
  const double va = nodes_[a.idx_].val;
  return push_scalar(Op::kSin, std::sin(va), a.idx_, 0, std::cos(va), 0.0,
                     rg(a.idx_));
}

Var Tape::cos(Var a) {
  check_owns(a);
  const double va = nodes_[a.idx_].val;
  return push_scalar(Op::kCos, std::cos(va), a.idx_, 0, -std::sin(va), 0.0,
                     rg(a.idx_));
}

Var Tape::atan2(Var y, Var x) {
  check_owns(y);
  check_owns(x);
  const double vy = nodes_[y.idx_].val, vx = nodes_[x.idx_].val;
  const double d = vx * vx + vy * vy;
  return push_scalar(Op::kAtan2, std::atan2(vy, vx), y.idx_, x.idx_, vx / d,
                     -vy / d, rg(y.idx_) || rg(x.idx_));
}

Var Tape::bce_with_logits(Var logit, Var label) {
  check_owns(logit);
  check_owns(label);
  const double z = nodes_[logit.idx_].val, y = nodes_[label.idx_].val;
  return push_scalar(Op::kBce, bce_with_logits_value(z, y), logit.idx_,
                     label.idx_, sigmoid(z) - y, -z,
                     rg(logit.idx_) || rg(label.idx_));
}

Mat Tape::pack(std::size_t rows, std::size_t cols,
               std::span<const Var> elems) {
  if (elems.size() != rows * cols) {
    throw InvalidInputError("pack: element count does not match shape");
  }
  Tensor t(rows, cols);
  bool needs = false;
  const std::uint32_t pos = static_cast<std::uint32_t>(args_.size());
  for (std::size_t i = 0; i < elems.size(); ++i) {
    check_owns(elems[i]);
    t.data[i] = nodes_[elems[i].idx_].val;
    needs = needs || rg(elems[i].idx_);
    args_.push_back(elems[i].idx_);
  }
  Mat m = push_tensor(Op::kPack, std::move(t), 0, 0, 0, needs);
  nodes_[m.idx_].args_pos = pos;
  nodes_[m.idx_].args_len = static_cast<std::uint32_t>(elems.size());
  return m;
}

Mat Tape::affine(Mat w, Mat x, Mat b) {
  check_owns(w);
  check_owns(x);
  check_owns(b);
  const Tensor& tw = tensors_[nodes_[w.idx_].ten];
  const Tensor& tx = tensors_[nodes_[x.idx_].ten];
  const Tensor& tb = tensors_[nodes_[b.idx_].ten];
  if (tw.cols != tx.rows || tb.rows != tw.rows || tb.cols != 1) {
    throw InvalidInputError("affine: shape mismatch");
  }
  Tensor y(tw.rows, tx.cols);
  const auto& k = kernels::ops();
  k.gemm_nn(y.data.data(), tw.data.data(), tx.data.data(), tw.rows, tw.cols,
            tx.cols, false);
  k.bias_add(y.data.data(), tb.data.data(), y.rows, y.cols);
  return push_tensor(Op::kAffine, std::move(y), w.idx_, x.idx_, b.idx_,
                     rg(w.idx_) || rg(x.idx_) || rg(b.idx_));
}

Mat Tape::relu(Mat x) {
  check_owns(x);
  const Tensor& tx = tensors_[nodes_[x.idx_].ten];
  Tensor y(tx.rows, tx.cols);
  kernels::ops().relu_fwd(y.data.data(), tx.data.data(), tx.size());
  return push_tensor(Op::kReluT, std::move(y), x.idx_, 0, 0, rg(x.idx_));
}

Var Tape::mean_softplus(Mat z) {
  check_owns(z);
  const Tensor& tz = tensors_[nodes_[z.idx_].ten];
  if (tz.size() == 0) throw InvalidInputError("mean_softplus: empty tensor");
  double acc = 0.0;
  for (double v : tz.data) acc += stable_softplus(v);
  return push_scalar(Op::kMeanSoftplus, acc / static_cast<double>(tz.size()),
                     z.idx_, 0, 0.0, 0.0, rg(z.idx_));
}

Var Tape::mean_bce_with_logits(Mat logits, Mat labels) {
  check_owns(logits);
  check_owns(labels);
  const Tensor& tz = tensors_[nodes_[logits.idx_].ten];
  const Tensor& ty = tensors_[nodes_[labels.idx_].ten];
  if (tz.rows != ty.rows || tz.cols != ty.cols || tz.size() == 0) {
    throw InvalidInputError("mean_bce_with_logits: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < tz.size(); ++i) {
    acc += bce_with_logits_value(tz.data[i], ty.data[i]);
  }
  return push_scalar(Op::kMeanBce, acc / static_cast<double>(tz.size()),
                     logits.idx_, labels.idx_, 0.0, 0.0,
                     rg(logits.idx_) || rg(labels.idx_));
}

Var Tape::item(Mat m) {
  check_owns(m);
  const Tensor& t = tensors_[nodes_[m.idx_].ten];
  if (t.size() != 1) throw InvalidInputError("item: tensor is not 1x1");
  return push_scalar(Op::kItem, t.data[0], m.idx_, 0, 1.0, 0.0, rg(m.idx_));
}

void Tape::backward(Var root) {
  check_owns(root);
  if (nodes_[root.idx_].ten >= 0) {
    throw InvalidInputError("backward root must be a scalar");
  }
  adj_.assign(nodes_.size(), 0.0);
  tadj_.resize(tensors_.size());
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    tadj_[i] = Tensor(tensors_[i].rows, tensors_[i].cols);
  }
  adj_[root.idx_] = 1.0;
  const auto& k = kernels::ops();

  for (std::uint32_t i = root.idx_ + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kTensorLeaf:
        break;
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv:
      case Op::kAtan2:
      case Op::kBce: {
        const double g = adj_[i];
        if (g == 0.0) break;
        if (rg(n.a)) adj_[n.a] += n.pa * g;
        if (rg(n.b)) adj_[n.b] += n.pb * g;
        break;
      }
      case Op::kNeg:
      case Op::kSquare:
      case Op::kSqrt:
      case Op::kRelu:
      case Op::kSoftplus:
      case Op::kSin:
      case Op::kCos: {
        const double g = adj_[i];
        if (g != 0.0 && rg(n.a)) adj_[n.a] += n.pa * g;
        break;
      }
      case Op::kItem: {
        const double g = adj_[i];
        if (g != 0.0 && rg(n.a)) tadj_[nodes_[n.a].ten].data[0] += g;
        break;
      }
      case Op::kMeanSoftplus: {
        const double g = adj_[i];
        if (g == 0.0 || !rg(n.a)) break;
        const Tensor& z = tensors_[nodes_[n.a].ten];
        Tensor& dz = tadj_[nodes_[n.a].ten];
        const double scale = g / static_cast<double>(z.size());
        for (std::size_t e = 0; e < z.size(); ++e) {
          dz.data[e] += scale * sigmoid(z.data[e]);
        }
        break;
      }
      case Op::kMeanBce: {
        const double g = adj_[i];
        if (g == 0.0) break;
        const Tensor& z = tensors_[nodes_[n.a].ten];
        const Tensor& y = tensors_[nodes_[n.b].ten];
        const double scale = g / static_cast<double>(z.size());
        if (rg(n.a)) {
          Tensor& dz = tadj_[nodes_[n.a].ten];
          for (std::size_t e = 0; e < z.size(); ++e) {
            dz.data[e] += scale * (sigmoid(z.data[e]) - y.data[e]);
          }
        }
        if (rg(n.b)) {
          Tensor& dy = tadj_[nodes_[n.b].ten];
          for (std::size_t e = 0; e < z.size(); ++e) {
            dy.data[e] += scale * (-z.data[e]);
          }
        }
        break;
      }
      case Op::kReluT: {
        const Tensor& g = tadj_[n.ten];
        if (!rg(n.a)) break;
        const Tensor& x = tensors_[nodes_[n.a].ten];
        Tensor& dx = tadj_[nodes_[n.a].ten];
        k.relu_bwd(dx.data.data(), g.data.data(), x.data.data(), x.size());
        break;
      }
      case Op::kAffine: {
        const Tensor& g = tadj_[n.ten];  // r x c
        const Tensor& w = tensors_[nodes_[n.a].ten];
        const Tensor& x = tensors_[nodes_[n.b].ten];
        if (rg(n.a)) {
          // dW (r x k) += G (r x c) * X^T (c x k)
          Tensor& dw = tadj_[nodes_[n.a].ten];
          k.gemm_nt(dw.data.data(), g.data.data(), x.data.data(), w.rows,
                    x.cols, w.cols, true);
        }
        if (rg(n.b)) {
          // dX (k x c) += W^T (k x r) * G (r x c)
          Tensor& dx = tadj_[nodes_[n.b].ten];
          k.gemm_tn(dx.data.data(), w.data.data(), g.data.data(), w.cols,
                    w.rows, x.cols, true);
        }
        if (rg(n.c)) {
          Tensor& db = tadj_[nodes_[n.c].ten];
          k.bias_row_sum(db.data.data(), g.data.data(), g.rows, g.cols);
        }
        break;
      }
      case Op::kPack: {
        const Tensor& g = tadj_[n.ten];
        for (std::uint32_t e = 0; e < n.args_len; ++e) {
          const std::uint32_t src = args_[n.args_pos + e];
          if (rg(src)) adj_[src] += g.data[e];
        }
        break;
      }
    }
  }
  has_grads_ = true;
}

double Tape::grad(Var v) const {
  check_owns(v);
  if (!has_grads_) throw InvalidInputError("grad queried before backward()");
  return adj_[v.idx_];
}

const Tensor& Tape::grad(Mat m) const {
  check_owns(m);
  if (!has_grads_) throw InvalidInputError("grad queried before backward()");
  return tadj_[nodes_[m.idx_].ten];
}

void Tape::reset() {
  nodes_.clear();
  tensors_.clear();
  args_.clear();
  adj_.clear();
  tadj_.clear();
  has_grads_ = false;
}

}  // namespace dnfomp::ad
