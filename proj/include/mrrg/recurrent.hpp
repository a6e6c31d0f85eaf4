#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/tensor.hpp"

namespace mrrg {

// Gated recurrent cell: input/forget/output gates plus tanh candidate.
struct LstmCell {
  Tensor w_i, w_f, w_o, w_g;  // (hidden, input)
  Tensor u_i, u_f, u_o, u_g;  // (hidden, hidden)
  Tensor b_i, b_f, b_o, b_g;  // (hidden)

  std::size_t input_size() const { return w_i.dim(1); }
  std::size_t hidden_size() const { return w_i.dim(0); }

  static LstmCell init(std::size_t input, std::size_t hidden, Rng& rng) {
    const double wb = std::sqrt(6.0 / static_cast<double>(input + hidden));
    const double ub = std::sqrt(6.0 / static_cast<double>(hidden + hidden));
    LstmCell c;
    c.w_i = Tensor::param({hidden, input}, rng, wb);
    c.w_f = Tensor::param({hidden, input}, rng, wb);
    c.w_o = Tensor::param({hidden, input}, rng, wb);
    c.w_g = Tensor::param({hidden, input}, rng, wb);
    c.u_i = Tensor::param({hidden, hidden}, rng, ub);
    c.u_f = Tensor::param({hidden, hidden}, rng, ub);
    c.u_o = Tensor::param({hidden, hidden}, rng, ub);
    c.u_g = Tensor::param({hidden, hidden}, rng, ub);
    c.b_i = Tensor::param_zeros({hidden});
    c.b_f = Tensor::param_zeros({hidden});
    c.b_o = Tensor::param_zeros({hidden});
    c.b_g = Tensor::param_zeros({hidden});
    return c;
  }

  struct State {
    Tensor h, c;
  };

  State zero_state() const {
    return {Tensor::zeros({hidden_size()}), Tensor::zeros({hidden_size()})};
  }

  State step(Tape& tape, const Tensor& x, const State& s) const {
    Tensor i = sigmoid(tape, add(tape, add(tape, matmul(tape, w_i, x),
                                           matmul(tape, u_i, s.h)), b_i));
    Tensor f = sigmoid(tape, add(tape, add(tape, matmul(tape, w_f, x),
                                           matmul(tape, u_f, s.h)), b_f));
    Tensor o = sigmoid(tape, add(tape, add(tape, matmul(tape, w_o, x),
                                           matmul(tape, u_o, s.h)), b_o));
    Tensor g = tanh_op(tape, add(tape, add(tape, matmul(tape, w_g, x),
                                           matmul(tape, u_g, s.h)), b_g));
    Tensor c_next = add(tape, mul(tape, f, s.c), mul(tape, i, g));
    Tensor h_next = mul(tape, o, tanh_op(tape, c_next));
    return {h_next, c_next};
  }

  // hidden states for every step, left to right (or right to left)
  std::vector<Tensor> run_all(Tape& tape, const std::vector<Tensor>& xs,
                              bool reverse = false) const {
    if (xs.empty()) throw std::invalid_argument("LstmCell::run_all: empty sequence");
    std::vector<Tensor> hs(xs.size());
    State s = zero_state();
    if (!reverse) {
      for (std::size_t t = 0; t < xs.size(); ++t) {
        s = step(tape, xs[t], s);
        hs[t] = s.h;
      }
    } else {
      for (std::size_t t = xs.size(); t > 0; --t) {
        s = step(tape, xs[t - 1], s);
        hs[t - 1] = s.h;
      }
    }
    return hs;
  }

  // final hidden state only
  Tensor run_final(Tape& tape, const std::vector<Tensor>& xs) const {
    if (xs.empty()) throw std::invalid_argument("LstmCell::run_final: empty sequence");
    State s = zero_state();
    for (const Tensor& x : xs) s = step(tape, x, s);
    return s.h;
  }

  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".w_i", w_i);
    out.emplace_back(prefix + ".w_f", w_f);
    out.emplace_back(prefix + ".w_o", w_o);
    out.emplace_back(prefix + ".w_g", w_g);
    out.emplace_back(prefix + ".u_i", u_i);
    out.emplace_back(prefix + ".u_f", u_f);
    out.emplace_back(prefix + ".u_o", u_o);
    out.emplace_back(prefix + ".u_g", u_g);
    out.emplace_back(prefix + ".b_i", b_i);
    out.emplace_back(prefix + ".b_f", b_f);
    out.emplace_back(prefix + ".b_o", b_o);
    out.emplace_back(prefix + ".b_g", b_g);
  }
};

// One dense layer with a selectable activation.
struct DenseLayer {
  enum class Act { none, tanh, relu, sigmoid };

  Tensor w;  // (out, in)
  Tensor b;  // (out)
  Act act = Act::none;

  static DenseLayer init(std::size_t in, std::size_t out, Act act, Rng& rng) {
    DenseLayer l;
    l.w = Tensor::param({out, in}, rng, std::sqrt(6.0 / static_cast<double>(in + out)));
    l.b = Tensor::param_zeros({out});
    l.act = act;
    return l;
  }

  Tensor apply(Tape& tape, const Tensor& x) const {
    Tensor y = affine(tape, x, w, b);
    switch (act) {
      case Act::none: return y;
      case Act::tanh: return tanh_op(tape, y);
      case Act::relu: return relu(tape, y);
      case Act::sigmoid: return sigmoid(tape, y);
    }
    return y;
  }

  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

}  // namespace mrrg
