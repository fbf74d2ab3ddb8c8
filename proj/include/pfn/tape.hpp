#pragma once
#include <functional>
#include <vector>

#include "pfn/tensor.hpp"

namespace pfn {

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in execution order, so reverse
// iteration is a topological order and the backward pass visits each node
// exactly once. A tape is built per training step and discarded afterwards.
class Tape {
 public:
  Var leaf(Tensor value, bool track = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var matmul(Var a, Var b, bool ta = false, bool tb = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_rowvec(Var a, Var v);          // [m x d] + [1 x d]
  Var scale(Var a, double s);
  Var mul_scalar(Var a, Var s);          // s is a scalar node
  Var exp_elem(Var a);
  Var gelu(Var a);
  Var elu1(Var a);                       // elu(x) + 1, strictly positive
  Var softmax_rows(Var a, double temperature = 1.0);
  Var layer_norm(Var x, Var gain, Var bias);  // row-wise, eps 1e-5
  Var conv1d_depthwise(Var x, Var taps, Var bias);  // taps [k x d], k odd
  Var pairwise_sqdist(Var q, Var k);     // [m x d],[n x d] -> [m x n]
  Var div_cols(Var num, Var den);        // [m x d] / [m x 1] row-wise
  Var slice_rows(Var a, int64_t r0, int64_t r1);
  Var slice_cols(Var a, int64_t c0, int64_t c1);
  Var concat_rows(Var a, Var b);
  Var concat_cols(const std::vector<Var>& parts);
  Var broadcast_row(Var v, int64_t m);   // [1 x d] -> [m x d]
  Var colsum(Var a);                     // [m x d] -> [1 x d]
  Var sum_all(Var a);
  Var mean_all(Var a);

  // Mean over rows of -log(p[bucket] / width[bucket]) where p = softmax(row).
  Var bar_nll(Var logits, const std::vector<int>& buckets,
              const std::vector<double>& widths);

  // Seeds d(loss)/d(loss) = 1 and accumulates into every tracked node.
  void backward(Var loss);

  const Tensor& val(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const;
  bool tracked(Var v) const { return nodes_[v.id].track; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool track = false;
    std::function<void(Tape&)> pull;
  };
  std::vector<Node> nodes_;

  Var push(Tensor value, bool track);
  void set_pull(Var v, std::function<void(Tape&)> fn) {
    nodes_[v.id].pull = std::move(fn);
  }
  Tensor& g(Var v) { return nodes_[v.id].grad; }
  void check2d(Var v, const char* op) const;
};

}  // namespace pfn
