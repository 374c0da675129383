#include "gav/tape.hpp"

namespace gav {

Var constant(Tensor t) {
  return Var{std::make_shared<Tensor>(std::move(t)), -1, nullptr};
}

Var constant(double v) { return constant(Tensor::scalar(v)); }

Var Tape::leaf(Tensor t) {
  int64_t id = fresh(t.shape());
  return wrap(std::move(t), id);
}

int64_t Tape::fresh(Shape out_shape) {
  if (done_) throw Error("tape: cannot record after backward");
  shapes_.push_back(std::move(out_shape));
  grads_.emplace_back();
  inited_.push_back(false);
  return static_cast<int64_t>(shapes_.size()) - 1;
}

void Tape::record(std::function<void(Tape&)> back) {
  if (done_) throw Error("tape: cannot record after backward");
  nodes_.push_back(Node{std::move(back)});
}

void Tape::accum(int64_t id, const Tensor& g) {
  if (g.shape() != shapes_[static_cast<size_t>(id)])
    throw Error("tape: gradient shape mismatch for variable " +
                std::to_string(id));
  Tensor& slot = grads_[static_cast<size_t>(id)];
  if (!inited_[static_cast<size_t>(id)]) {
    slot = g;
    inited_[static_cast<size_t>(id)] = true;
    return;
  }
  double* d = slot.data();
  const double* s = g.data();
  int64_t n = slot.size();
  for (int64_t i = 0; i < n; ++i) d[i] += s[i];
}

void Tape::accum_at(int64_t id, int64_t flat_index, double g) {
  Tensor& slot = grads_[static_cast<size_t>(id)];
  if (!inited_[static_cast<size_t>(id)]) {
    slot = Tensor(shapes_[static_cast<size_t>(id)]);
    inited_[static_cast<size_t>(id)] = true;
  }
  slot[flat_index] += g;
}

const Tensor* Tape::grad_in(int64_t id) const {
  if (!inited_[static_cast<size_t>(id)]) return nullptr;
  return &grads_[static_cast<size_t>(id)];
}

void Tape::backward(const Var& out) {
  if (done_) throw Error("tape: backward called twice");
  if (out.tape != this || out.is_const())
    throw Error("tape: output variable not recorded on this tape");
  if (out.value().size() != 1)
    throw Error("tape: backward requires a scalar output, got shape " +
                shape_str(out.shape()));
  grads_[static_cast<size_t>(out.id)] = Tensor::full(out.shape(), 1.0);
  inited_[static_cast<size_t>(out.id)] = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->back(*this);
  }
  done_ = true;
}

Tensor Tape::grad(const Var& v) const {
  if (!done_) throw Error("tape: grad read before backward");
  if (v.tape != this || v.is_const())
    throw Error("tape: variable not recorded on this tape");
  const Tensor* g = grad_in(v.id);
  if (!g) return Tensor(shapes_[static_cast<size_t>(v.id)]);
  return *g;
}

Tape* common_tape(std::initializer_list<const Var*> vars) {
  Tape* t = nullptr;
  for (const Var* v : vars) {
    if (v->is_const()) continue;
    if (t && v->tape != t) throw Error("tape: inputs from different tapes");
    t = v->tape;
  }
  return t;
}

}  // namespace gav
