// maac/numerics/graph.h
//
// Reverse-mode differentiation over a dynamically recorded graph. A Var is a
// handle to an immutable node; operations on Vars that depend on at least one
// gradient-requiring input record a backward closure. Calling backward() on a
// scalar Var accumulates gradients into the Parameters that were bound as
// leaves. Gradients add across calls until zero_grad().

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "maac/numerics/rng.h"
#include "maac/numerics/tensor.h"

namespace maac {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Buffers (e.g. normalization running statistics) are checkpointed but
  // never updated by an optimizer.
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

// Owns parameters in insertion order; the order is the checkpoint manifest.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(std::string name, Tensor init, bool trainable = true);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> with_prefix(std::string_view prefix);

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  // Number of trainable scalars whose names start with prefix.
  std::size_t scalar_count(std::string_view prefix = "") const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  Parameter* param = nullptr;

  Tensor& grad_buffer();
};

}  // namespace detail

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  // Gradient accumulated by the last backward(); empty for constants.
  const Tensor& grad() const { return node_->grad; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  static Var leaf(Parameter& p);
  static Var from_node(std::shared_ptr<detail::Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds a result node. The backward closure is attached only when some
// input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(detail::Node&)> backward);

// Seeds d(loss)/d(loss) = 1 and propagates. loss must hold one element.
void backward(const Var& loss);

// Binds parameters into a forward pass and carries the train/eval mode,
// the dropout random stream and the dropout mask tape.
class Binding {
 public:
  using FrozenFn = std::function<bool(const Parameter&)>;

  Binding(ParameterStore& store, bool record_grads, bool training,
          std::uint64_t seed = 0, FrozenFn frozen = {});

  Var operator()(std::string_view name);
  Var param(Parameter& p);

  bool training() const { return training_; }
  bool records_grads() const { return record_grads_; }
  ParameterStore& store() { return *store_; }
  Rng& rng() { return rng_; }

  // Dropout masks are appended to a tape while recording; in replay mode the
  // stored masks are reused in order so a forward pass can be repeated.
  Tensor dropout_mask(const Shape& shape, double rate);
  void replay_masks(std::vector<Tensor> masks);
  const std::vector<Tensor>& recorded_masks() const { return masks_; }

 private:
  ParameterStore* store_;
  bool record_grads_;
  bool training_;
  Rng rng_;
  FrozenFn frozen_;
  std::unordered_map<const Parameter*, Var> cache_;
  std::vector<Tensor> masks_;
  bool replaying_ = false;
  std::size_t mask_cursor_ = 0;
};

}  // namespace maac
