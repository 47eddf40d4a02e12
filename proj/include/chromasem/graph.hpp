#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "chromasem/kernels/ops.hpp"
#include "chromasem/weights.hpp"

namespace chromasem {

enum class Backend { parallel, reference };

/// Reverse-mode tape over NCHW tensors.
///
/// Nodes are appended in evaluation order, so reverse creation order is a valid
/// topological order for backward(). A parameter used several times (the shared
/// encoder) maps to a single node and its gradient accumulates there.
/// With `record == false` no backward closures are kept.
template <typename T>
class Graph {
 public:
  using Var = int;

  explicit Graph(bool record = true, Backend backend = Backend::parallel)
      : record_(record), backend_(backend) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  Backend backend() const { return backend_; }

  Var input(Tensor<T> value) {
    Node& n = push();
    n.value = std::move(value);
    return last();
  }

  Var param(const Parameter<T>& p) {
    auto it = params_.find(&p);
    if (it != params_.end()) return it->second;
    Node& n = push();
    n.ref = &p.value;
    n.requires_grad = record_;
    const Var id = last();
    params_.emplace(&p, id);
    return id;
  }

  const Tensor<T>& value(Var v) const { return nodes_[v]->get(); }
  Tensor<T>& mutable_value(Var v) { return nodes_[v]->value; }

  /// Gradient accumulated for a node; nullptr when backward never reached it.
  const Tensor<T>* grad(Var v) const {
    const Node& n = *nodes_[v];
    return n.grad.empty() ? nullptr : &n.grad;
  }
  const Tensor<T>* param_grad(const Parameter<T>& p) const {
    auto it = params_.find(&p);
    return it == params_.end() ? nullptr : grad(it->second);
  }

  Var conv2d(Var x, Var w, Var b, kernels::ConvParams p) {
    Tensor<T> y = backend_ == Backend::parallel
                      ? kernels::parallel::conv2d_forward(value(x), value(w), &value(b), p)
                      : kernels::reference::conv2d_forward(value(x), value(w), &value(b), p);
    return op(std::move(y), {x, w, b}, [this, x, w, b, p](const Tensor<T>& dy) {
      auto* dx = sink(x);
      auto* dw = sink(w);
      auto* db = sink(b);
      if (backend_ == Backend::parallel)
        kernels::parallel::conv2d_backward(value(x), value(w), dy, p, dx, dw, db);
      else
        kernels::reference::conv2d_backward(value(x), value(w), dy, p, dx, dw, db);
    });
  }

  Var conv_transpose2d(Var x, Var w, Var b, kernels::ConvParams p) {
    Tensor<T> y =
        backend_ == Backend::parallel
            ? kernels::parallel::conv_transpose2d_forward(value(x), value(w), &value(b), p)
            : kernels::reference::conv_transpose2d_forward(value(x), value(w), &value(b), p);
    return op(std::move(y), {x, w, b}, [this, x, w, b, p](const Tensor<T>& dy) {
      auto* dx = sink(x);
      auto* dw = sink(w);
      auto* db = sink(b);
      if (backend_ == Backend::parallel)
        kernels::parallel::conv_transpose2d_backward(value(x), value(w), dy, p, dx, dw, db);
      else
        kernels::reference::conv_transpose2d_backward(value(x), value(w), dy, p, dx, dw, db);
    });
  }

  Var leaky_relu(Var x, T slope) {
    Tensor<T> y = backend_ == Backend::parallel
                      ? kernels::parallel::leaky_relu_forward(value(x), slope)
                      : kernels::reference::leaky_relu_forward(value(x), slope);
    return op(std::move(y), {x}, [this, x, slope](const Tensor<T>& dy) {
      if (auto* dx = sink(x)) {
        if (backend_ == Backend::parallel)
          kernels::parallel::leaky_relu_backward(value(x), dy, slope, *dx);
        else
          kernels::reference::leaky_relu_backward(value(x), dy, slope, *dx);
      }
    });
  }

  Var tanh(Var x) {
    Tensor<T> y = backend_ == Backend::parallel ? kernels::parallel::tanh_forward(value(x))
                                                : kernels::reference::tanh_forward(value(x));
    const Var out = op(std::move(y), {x}, {});
    if (record_ && nodes_[out]->requires_grad)
      nodes_[out]->backward = [this, x, out](const Tensor<T>& dy) {
        if (auto* dx = sink(x)) {
          if (backend_ == Backend::parallel)
            kernels::parallel::tanh_backward(value(out), dy, *dx);
          else
            kernels::reference::tanh_backward(value(out), dy, *dx);
        }
      };
    return out;
  }

  Var instance_norm(Var x, T eps) {
    auto stats = std::make_shared<kernels::NormStats<T>>();
    Tensor<T> y = backend_ == Backend::parallel
                      ? kernels::parallel::instance_norm_forward(value(x), eps, stats.get())
                      : kernels::reference::instance_norm_forward(value(x), eps, stats.get());
    const Var out = op(std::move(y), {x}, {});
    if (record_ && nodes_[out]->requires_grad)
      nodes_[out]->backward = [this, x, out, stats](const Tensor<T>& dy) {
        if (auto* dx = sink(x)) {
          if (backend_ == Backend::parallel)
            kernels::parallel::instance_norm_backward(value(out), *stats, dy, *dx);
          else
            kernels::reference::instance_norm_backward(value(out), *stats, dy, *dx);
        }
      };
    return out;
  }

  Var add(Var a, Var b) {
    Tensor<T> y = value(a);
    kernels::add_into(value(b), y);
    return op(std::move(y), {a, b}, [this, a, b](const Tensor<T>& dy) {
      if (auto* da = sink(a)) kernels::add_into(dy, *da);
      if (auto* db = sink(b)) kernels::add_into(dy, *db);
    });
  }

  /// Channel concatenation [a; b].
  Var concat(Var a, Var b) {
    const Shape sa = value(a).shape();
    const Shape sb = value(b).shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
      throw ShapeError("concat: " + sa.str() + " vs " + sb.str());
    Tensor<T> y(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t plane = sa.plane();
    for (int n = 0; n < sa.n; ++n) {
      std::copy_n(value(a).plane(n, 0), sa.c * plane, y.plane(n, 0));
      std::copy_n(value(b).plane(n, 0), sb.c * plane, y.plane(n, sa.c));
    }
    return op(std::move(y), {a, b}, [this, a, b, sa, sb, plane](const Tensor<T>& dy) {
      auto* da = sink(a);
      auto* db = sink(b);
      for (int n = 0; n < sa.n; ++n) {
        if (da) {
          const T* src = dy.plane(n, 0);
          T* dst = da->plane(n, 0);
          for (std::size_t i = 0; i < sa.c * plane; ++i) dst[i] += src[i];
        }
        if (db) {
          const T* src = dy.plane(n, sa.c);
          T* dst = db->plane(n, 0);
          for (std::size_t i = 0; i < sb.c * plane; ++i) dst[i] += src[i];
        }
      }
    });
  }

  /// Seeds d(out) with `seed` and propagates to every reachable node.
  void backward(Var out, const Tensor<T>& seed) {
    if (!record_) throw Error("graph", "backward() on a graph built without recording");
    if (seed.shape() != value(out).shape())
      throw ShapeError("backward seed " + seed.shape().str() + " vs output " +
                       value(out).shape().str());
    if (auto* g = sink(out)) kernels::add_into(seed, *g);
    for (Var v = out; v >= 0; --v) {
      Node& n = *nodes_[v];
      if (n.backward && !n.grad.empty()) n.backward(n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void(const Tensor<T>&)> backward;
    const Tensor<T>& get() const { return ref ? *ref : value; }
  };

  Node& push() {
    nodes_.push_back(std::make_unique<Node>());
    return *nodes_.back();
  }
  Var last() const { return static_cast<Var>(nodes_.size()) - 1; }

  Var op(Tensor<T> y, std::initializer_list<Var> inputs,
         std::function<void(const Tensor<T>&)> backward) {
    Node& n = push();
    n.value = std::move(y);
    if (record_) {
      for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_[in]->requires_grad;
      if (n.requires_grad) n.backward = std::move(backward);
    }
    return last();
  }

  // Gradient buffer for `v`, allocated on first use; nullptr if `v` needs none.
  Tensor<T>* sink(Var v) {
    Node& n = *nodes_[v];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor<T>(n.get().shape());
    return &n.grad;
  }

  bool record_;
  Backend backend_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::unordered_map<const Parameter<T>*, Var> params_;
};

}  // namespace chromasem
