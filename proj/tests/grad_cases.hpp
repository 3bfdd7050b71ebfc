#pragma once

// Finite-difference cases, one per differentiable operation. Every case
// draws its own sizes and values from the generator, reduces the output to a
// scalar through a random bilinear form and returns the check result.

#include <functional>
#include <string>
#include <vector>

#include "support.hpp"

namespace sgg::gen {

struct GradCase {
  std::string name;
  std::function<GradCheckResult(Rng&)> run;
};

/// l^T out r with fixed random l, r: every output entry gets its own weight.
inline Var bilinear(Tape& tape, Var out, Rng& rng) {
  const Matrix l = random_matrix(1, out.rows(), rng);
  const Matrix r = random_matrix(out.cols(), 1, rng);
  return matmul(matmul(tape.constant(l), out), tape.constant(r));
}

namespace detail_grad {

inline std::size_t size_in(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// The reduction weights must not change between probes: draw them once from
// a seed fixed per configuration.
template <class Body>
GradCheckResult check(Rng& rng, const std::vector<Matrix>& inputs, Body body) {
  const std::uint64_t seed = rng.next_seed();
  return check_gradients(
      [&](Tape& tape, const std::vector<Var>& x) {
        Rng weights(seed);
        return bilinear(tape, body(tape, x), weights);
      },
      inputs);
}

inline HeteroGraph graph(Rng& rng) {
  const std::size_t n = size_in(rng, 2, 5);
  return random_hetero_graph(n, size_in(rng, 1, n * (n - 1)), rng);
}

}  // namespace detail_grad

inline std::vector<GradCase> grad_cases() {
  using detail_grad::check;
  using detail_grad::size_in;
  std::vector<GradCase> cases;

  cases.push_back({"matmul", [](Rng& rng) {
                     const std::size_t a = size_in(rng, 1, 4), b = size_in(rng, 1, 4), c = size_in(rng, 1, 4);
                     return check(rng, {random_matrix(a, b, rng), random_matrix(b, c, rng)},
                                  [](Tape&, const std::vector<Var>& x) { return matmul(x[0], x[1]); });
                   }});
  cases.push_back({"aggregate", [](Rng& rng) {
                     const std::size_t a = size_in(rng, 1, 5), b = size_in(rng, 1, 5), c = size_in(rng, 1, 4);
                     return check(rng, {random_matrix(a, b, rng), random_matrix(b, c, rng)},
                                  [](Tape&, const std::vector<Var>& x) { return aggregate(x[0], x[1]); });
                   }});
  cases.push_back({"add_bias_concat_transpose", [](Rng& rng) {
                     const std::size_t r = size_in(rng, 1, 4), c = size_in(rng, 1, 4), d = size_in(rng, 1, 3);
                     return check(rng, {random_matrix(r, c, rng), random_matrix(1, c, rng), random_matrix(r, d, rng)},
                                  [](Tape&, const std::vector<Var>& x) {
                                    return transpose(concat_cols(add_bias(x[0], x[1]), x[2]));
                                  });
                   }});
  cases.push_back({"relu_sigmoid_scale", [](Rng& rng) {
                     const std::size_t r = size_in(rng, 1, 4), c = size_in(rng, 1, 4);
                     return check(rng, {random_matrix(r, c, rng), random_matrix(r, c, rng)},
                                  [](Tape&, const std::vector<Var>& x) {
                                    return add(relu(x[0]), scale(sigmoid(x[1]), -1.7));
                                  });
                   }});
  cases.push_back({"masked_softmax", [](Rng& rng) {
                     const std::size_t r = size_in(rng, 1, 4), c = size_in(rng, 1, 5);
                     std::vector<std::uint8_t> keep(r * c);
                     for (auto& k : keep) k = rng.bernoulli(0.7) ? 1 : 0;
                     return check(rng, {random_matrix(r, c, rng, 2.0)}, [keep](Tape&, const std::vector<Var>& x) {
                       return softmax_row(x[0], keep, EmptyRow::Zero);
                     });
                   }});
  cases.push_back({"select_gather_scatter_sum", [](Rng& rng) {
                     const std::size_t r = size_in(rng, 2, 5), c = size_in(rng, 2, 4);
                     std::vector<std::size_t> rows;
                     for (std::size_t k = 0; k < 4; ++k) rows.push_back(rng.below(r));
                     const auto cells = rng.sample_without_replacement(r * c, size_in(rng, 1, r * c));
                     std::vector<std::size_t> gr, gc;
                     for (std::size_t e : cells) {
                       gr.push_back(e / c);
                       gc.push_back(e % c);
                     }
                     return check(rng, {random_matrix(r, c, rng)}, [=](Tape&, const std::vector<Var>& x) {
                       const Var picked = gather_elements(x[0], gr, gc);
                       const Var back = scatter_elements(picked, gr, gc, r, c);
                       return concat_cols(select_rows(add(x[0], back), rows), select_rows(reduce_sum(x[0]), {0, 0, 0, 0}));
                     });
                   }});
  cases.push_back({"mlp2", [](Rng& rng) {
                     const std::size_t n = size_in(rng, 1, 4), in = size_in(rng, 1, 4), hid = size_in(rng, 1, 5),
                                       out = size_in(rng, 1, 4);
                     const Mlp2 m = random_mlp2(in, hid, out, rng);
                     return check(rng, {random_matrix(n, in, rng), m.w1, random_matrix(1, hid, rng, 0.3), m.w2, m.b2},
                                  [](Tape&, const std::vector<Var>& x) {
                                    return mlp2_forward(Mlp2Vars{x[1], x[2], x[3], x[4]}, x[0]);
                                  });
                   }});
  cases.push_back({"relatedness_kernel", [](Rng& rng) {
                     const std::size_t n = size_in(rng, 2, 5), c = size_in(rng, 2, 5), hid = size_in(rng, 1, 4),
                                       proj = size_in(rng, 1, 4);
                     const RepnParams p = random_repn_params(c, hid, proj, rng);
                     std::vector<std::vector<double>> rows;
                     for (std::size_t i = 0; i < n; ++i) rows.push_back(random_distribution(c, rng));
                     return check(rng,
                                  {Matrix::stack_rows(rows, c), p.phi.w1, p.phi.b1, p.phi.w2, p.phi.b2, p.psi.w1,
                                   p.psi.b1, p.psi.w2, p.psi.b2},
                                  [](Tape&, const std::vector<Var>& x) {
                                    const RepnVars v{{x[1], x[2], x[3], x[4]}, {x[5], x[6], x[7], x[8]}};
                                    return relatedness_scores(v, x[0]);
                                  });
                   }});
  cases.push_back({"repn_loss", [](Rng& rng) {
                     const std::size_t n = size_in(rng, 1, 6);
                     std::vector<double> labels;
                     for (std::size_t i = 0; i < n; ++i) labels.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
                     return check_gradients(
                         [&](Tape&, const std::vector<Var>& x) { return repn_loss(sigmoid(x[0]), labels); },
                         {random_matrix(n, 1, rng)});
                   }});
  cases.push_back({"classification_losses", [](Rng& rng) {
                     const std::size_t no = size_in(rng, 1, 5), nr = size_in(rng, 1, 5), c = size_in(rng, 2, 5),
                                       p = size_in(rng, 2, 4);
                     std::vector<std::optional<std::size_t>> ol(no), pl(nr);
                     for (auto& l : ol)
                       if (rng.bernoulli(0.8)) l = rng.below(c);
                     for (auto& l : pl)
                       if (rng.bernoulli(0.8)) l = rng.below(p);
                     ol[0] = rng.below(c);
                     return check_gradients(
                         [&](Tape&, const std::vector<Var>& x) { return classification_losses(x[0], x[1], ol, pl); },
                         {random_matrix(no, c, rng, 2.0), random_matrix(nr, p, rng, 2.0)});
                   }});
  cases.push_back({"attention", [](Rng& rng) {
                     const HeteroGraph g = detail_grad::graph(rng);
                     const std::size_t d = size_in(rng, 1, 3), att = size_in(rng, 1, 4);
                     const EdgeGroup group = kEdgeGroups[rng.below(kEdgeGroups.size())];
                     return check(rng,
                                  {random_matrix(g.n_objects, d, rng), random_matrix(g.n_relations(), d, rng),
                                   random_matrix(2 * d, att, rng), random_matrix(att, 1, rng)},
                                  [&g, group](Tape&, const std::vector<Var>& x) {
                                    return attention_scores(AttentionHeadVars{x[2], x[3]}, x[0], x[1], g, group);
                                  });
                   }});
  cases.push_back({"gcn_layer", [](Rng& rng) {
                     const std::size_t n = size_in(rng, 1, 5), d = size_in(rng, 1, 4);
                     return check(rng, {random_matrix(n, d, rng), random_matrix(n, n, rng), random_matrix(d, d, rng)},
                                  [](Tape&, const std::vector<Var>& x) { return gcn_layer(x[0], x[1], x[2]); });
                   }});
  auto step_case = [](bool objects) {
    return [objects](Rng& rng) {
      const HeteroGraph g = detail_grad::graph(rng);
      const std::size_t d = size_in(rng, 1, 3), att = size_in(rng, 1, 3);
      const TypedTransforms w = random_typed_transforms(d, d, 0.7, rng);
      return check(rng,
                   {random_matrix(g.n_objects, d, rng), random_matrix(g.n_relations(), d, rng), w.w_skip, w.w_sr,
                    w.w_or, w.w_rs, w.w_ro, random_matrix(2 * d, att, rng), random_matrix(att, 1, rng)},
                   [&g, objects](Tape&, const std::vector<Var>& x) {
                     const TypedTransformsVars tv{x[2], x[3], x[4], x[5], x[6]};
                     const AttentionVars a = attention_map(AttentionHeadVars{x[7], x[8]}, x[0], x[1], g);
                     return objects ? agcn_step_objects(tv, x[0], x[1], a) : agcn_step_relations(tv, x[0], x[1], a);
                   });
    };
  };
  cases.push_back({"object_update", step_case(true)});
  cases.push_back({"relation_update", step_case(false)});
  cases.push_back({"two_level", [](Rng& rng) {
                     const HeteroGraph g = detail_grad::graph(rng);
                     const std::size_t d = size_in(rng, 1, 3), c = size_in(rng, 2, 3), p = size_in(rng, 2, 3);
                     const TypedTransforms v = random_typed_transforms(d, d, 0.7, rng);
                     const TypedTransforms s = random_typed_transforms(c, p, 0.7, rng);
                     return check(rng,
                                  {random_matrix(g.n_objects, d, rng), random_matrix(g.n_relations(), d, rng),
                                   random_matrix(g.n_objects, c, rng), random_matrix(g.n_relations(), p, rng), v.w_skip,
                                   v.w_sr, v.w_or, v.w_rs, v.w_ro, random_matrix(2 * d, 3, rng),
                                   random_matrix(3, 1, rng), s.w_skip, s.w_sr, s.w_or, s.w_rs, s.w_ro},
                                  [&g](Tape& tape, const std::vector<Var>& x) {
                                    const AgcnVars vis{{x[4], x[5], x[6], x[7], x[8]}, {x[9], x[10]}};
                                    const TypedTransformsVars sem{x[11], x[12], x[13], x[14], x[15]};
                                    const auto out = run_two_level(vis, sem, g, x[0], x[1], x[2], x[3], 2);
                                    Rng w(7);
                                    return concat_cols(bilinear(tape, out.object_logits, w),
                                                       bilinear(tape, out.predicate_logits, w));
                                  });
                   }});
  return cases;
}

}  // namespace sgg::gen
