// maac/numerics/graph.cc

#include "maac/numerics/graph.h"

#include <stdexcept>
#include <unordered_set>

namespace maac {

Parameter& ParameterStore::add(std::string name, Tensor init, bool trainable) {
  if (index_.count(name)) {
    throw std::invalid_argument("duplicate parameter " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Tensor(init.shape(), 0.0, init.precision());
  p->value = std::move(init);
  p->trainable = trainable;
  Parameter& ref = *p;
  index_.emplace(ref.name, &ref);
  params_.push_back(std::move(p));
  return ref;
}

Parameter* ParameterStore::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::get(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("unknown parameter " + std::string(name));
}

const Parameter& ParameterStore::get(std::string_view name) const {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("unknown parameter " + std::string(name));
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterStore::with_prefix(std::string_view prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p->name.starts_with(prefix)) out.push_back(p.get());
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterStore::scalar_count(std::string_view prefix) const {
  std::size_t n = 0;
  for (auto& p : params_) {
    if (p->trainable && p->name.starts_with(prefix)) n += p->value.size();
  }
  return n;
}

namespace detail {

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

}  // namespace detail

Var::Var(Tensor value) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
}

Var Var::leaf(Parameter& p) {
  auto n = std::make_shared<detail::Node>();
  n->value = p.value;
  n->requires_grad = true;
  n->param = &p;
  return from_node(std::move(n));
}

Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(detail::Node&)> backward_fn) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.node());
    n->backward = std::move(backward_fn);
  }
  return Var::from_node(std::move(n));
}

void backward(const Var& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a single value");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) n->grad = Tensor();
  loss.node()->grad_buffer()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->grad.empty()) continue;
    if (n->backward) n->backward(*n);
    if (n->param) {
      auto& g = n->param->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n->grad[i];
      g.finalize("backward");
    }
  }
}

Binding::Binding(ParameterStore& store, bool record_grads, bool training,
                 std::uint64_t seed, FrozenFn frozen)
    : store_(&store),
      record_grads_(record_grads),
      training_(training),
      rng_(seed),
      frozen_(std::move(frozen)) {}

Var Binding::operator()(std::string_view name) {
  return param(store_->get(name));
}

Var Binding::param(Parameter& p) {
  auto it = cache_.find(&p);
  if (it != cache_.end()) return it->second;
  const bool frozen = !p.trainable || (frozen_ && frozen_(p));
  Var v = (record_grads_ && !frozen) ? Var::leaf(p) : Var(p.value);
  cache_.emplace(&p, v);
  return v;
}

Tensor Binding::dropout_mask(const Shape& shape, double rate) {
  if (replaying_) {
    if (mask_cursor_ >= masks_.size() ||
        masks_[mask_cursor_].shape() != shape) {
      throw std::logic_error("dropout replay: mask tape mismatch");
    }
    return masks_[mask_cursor_++];
  }
  Tensor mask(shape, 0.0);
  const double keep = 1.0 - rate;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng_.uniform() < keep ? 1.0 / keep : 0.0;
  }
  masks_.push_back(mask);
  return mask;
}

void Binding::replay_masks(std::vector<Tensor> masks) {
  masks_ = std::move(masks);
  replaying_ = true;
  mask_cursor_ = 0;
}

}  // namespace maac
