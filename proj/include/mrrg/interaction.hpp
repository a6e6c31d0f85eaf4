#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrrg/recurrent.hpp"
#include "mrrg/tensor.hpp"

namespace mrrg {

// Question<->context attention plus the two recurrent summarizers. The
// cells consume [attended; original context] rows (2d); strict mode feeds
// the attended rows alone, matching the bare formula.
struct InteractionParams {
  enum class Sim { dot, trilinear };

  std::size_t d = 64;
  Sim sim = Sim::dot;
  bool strict_attended_only = false;

  Tensor w_tri;  // (3d), trilinear similarity weights
  LstmCell cell_q2c;
  LstmCell cell_c2q;

  static InteractionParams init(std::size_t d, Sim sim, bool strict, Rng& rng) {
    InteractionParams p;
    p.d = d;
    p.sim = sim;
    p.strict_attended_only = strict;
    p.w_tri = Tensor::param({3 * d}, rng, std::sqrt(1.0 / static_cast<double>(d)));
    const std::size_t in = strict ? d : 2 * d;
    p.cell_q2c = LstmCell::init(in, d, rng);
    p.cell_c2q = LstmCell::init(in, d, rng);
    return p;
  }

  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>& out) const {
    if (sim == Sim::trilinear) out.emplace_back(prefix + ".w_tri", w_tri);
    cell_q2c.collect_params(prefix + ".cell_q2c", out);
    cell_c2q.collect_params(prefix + ".cell_c2q", out);
  }
};

// similarity matrix S (lc, lq); dot mode scales by 1/sqrt(d)
inline Tensor similarity(Tape& tape, const Tensor& e_q, const Tensor& e_c,
                         const InteractionParams& params) {
  if (e_q.rank() != 2 || e_c.rank() != 2 || e_q.dim(1) != e_c.dim(1))
    throw ShapeError("similarity: incompatible shapes " + shape_str(e_q.shape()) +
                     " and " + shape_str(e_c.shape()));
  if (e_q.dim(0) == 0 || e_c.dim(0) == 0)
    throw std::invalid_argument("similarity: empty sequence");
  const std::size_t d = e_q.dim(1);
  if (params.sim == InteractionParams::Sim::dot) {
    Tensor s = matmul(tape, e_c, e_q, false, true);
    return scale(tape, s, 1.0 / std::sqrt(static_cast<double>(d)));
  }
  // trilinear: w_c . c_i + w_q . q_j + w_x . (c_i * q_j)
  Tape& t = tape;
  Tensor w_c = slice(t, params.w_tri, 0, d);
  Tensor w_q = slice(t, params.w_tri, d, d);
  Tensor w_x = slice(t, params.w_tri, 2 * d, d);
  Tensor c_term = matmul(t, e_c, w_c);                      // (lc)
  Tensor q_term = matmul(t, e_q, w_q);                      // (lq)
  std::vector<Tensor> scaled_rows;
  scaled_rows.reserve(e_c.dim(0));
  for (std::size_t i = 0; i < e_c.dim(0); ++i)
    scaled_rows.push_back(mul(t, row(t, e_c, i), w_x));
  Tensor cx = stack_rows(t, scaled_rows);                   // (lc, d)
  Tensor s = matmul(t, cx, e_q, false, true);               // (lc, lq)
  s = add_colvec(t, s, c_term);
  Tensor zeros = Tensor::zeros({e_c.dim(0), e_q.dim(0)});
  return add(t, s, add(t, zeros, q_term));                  // broadcast q_term per row
}

// E_{C->q}: per context row, softmax over question positions, then a
// weighted sum of question rows. (lc, d)
inline Tensor c2q_attention(Tape& tape, const Tensor& e_q, const Tensor& e_c,
                            const InteractionParams& params) {
  Tensor s = similarity(tape, e_q, e_c, params);
  Tensor weights = softmax_rows(tape, s);
  return matmul(tape, weights, e_q);
}

// E_{q->C}: softmax over context positions of the per-row max similarity,
// attended context vector broadcast to every row. (lc, d)
inline Tensor q2c_attention(Tape& tape, const Tensor& e_q, const Tensor& e_c,
                            const InteractionParams& params) {
  Tensor s = similarity(tape, e_q, e_c, params);
  Tensor b = softmax(tape, row_max(tape, s));
  Tensor c_hat = matmul(tape, b, e_c);  // (d)
  std::vector<Tensor> rows(e_c.dim(0), c_hat);
  return stack_rows(tape, rows);
}

// final hidden state of a left-to-right pass over the rows
inline Tensor recur_encode(Tape& tape, const std::vector<Tensor>& rows,
                           const LstmCell& cell) {
  if (rows.empty()) throw std::invalid_argument("recur_encode: empty sequence");
  return cell.run_final(tape, rows);
}

struct InteractionOutput {
  Tensor f_q2c;  // (d)
  Tensor f_c2q;  // (d)
};

// both attention directions summarized to fixed vectors
inline InteractionOutput interact(Tape& tape, const Tensor& e_q, const Tensor& e_c,
                                  const InteractionParams& params) {
  Tensor att_q2c = q2c_attention(tape, e_q, e_c, params);
  Tensor att_c2q = c2q_attention(tape, e_q, e_c, params);
  const std::size_t lc = e_c.dim(0);
  std::vector<Tensor> rows_q2c, rows_c2q;
  rows_q2c.reserve(lc);
  rows_c2q.reserve(lc);
  for (std::size_t i = 0; i < lc; ++i) {
    Tensor orig = row(tape, e_c, i);
    if (params.strict_attended_only) {
      rows_q2c.push_back(row(tape, att_q2c, i));
      rows_c2q.push_back(row(tape, att_c2q, i));
    } else {
      rows_q2c.push_back(concat(tape, {row(tape, att_q2c, i), orig}));
      rows_c2q.push_back(concat(tape, {row(tape, att_c2q, i), orig}));
    }
  }
  InteractionOutput out;
  out.f_q2c = recur_encode(tape, rows_q2c, params.cell_q2c);
  out.f_c2q = recur_encode(tape, rows_c2q, params.cell_c2q);
  return out;
}

}  // namespace mrrg
