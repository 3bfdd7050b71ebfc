#include <gtest/gtest.h>

#include <cmath>

#include "../oracles.hpp"
#include "../support.hpp"

using namespace sgg;

namespace {

struct Case {
  HeteroGraph g;
  Matrix z_obj, z_rel;
  AttentionHead head;
};

Case random_setup(Rng& rng, std::size_t d = 3, std::size_t att = 4) {
  const std::size_t n = 2 + rng.below(4);
  Case s{gen::random_hetero_graph(n, 1 + rng.below(n * (n - 1)), rng), {}, {}, {}};
  s.z_obj = gen::random_matrix(n, d, rng);
  s.z_rel = gen::random_matrix(s.g.n_relations(), d, rng);
  s.head = {gen::random_matrix(2 * d, att, rng), gen::random_matrix(att, 1, rng)};
  return s;
}

}  // namespace

TEST(Attention, RowsNormaliseWithinEachGroup) {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Case s = random_setup(rng);
    for (EdgeGroup grp : kEdgeGroups) {
      const Matrix a = attention_scores(s.head, s.z_obj, s.z_rel, s.g, grp);
      const GroupLayout l = group_layout(s.g, grp);
      const auto keep = l.keep_mask();
      for (std::size_t t = 0; t < l.n_targets; ++t) {
        double sum = 0.0;
        bool any = false;
        for (std::size_t j = 0; j < l.n_sources; ++j) {
          const bool self = grp == EdgeGroup::Skip && j == t;
          if (self) {
            EXPECT_EQ(a(t, j), 1.0);
          } else if (!keep[t * l.n_sources + j]) {
            EXPECT_EQ(a(t, j), 0.0);
          } else {
            sum += a(t, j);
            any = true;
          }
        }
        if (any) {
          EXPECT_NEAR(sum, 1.0, 1e-9) << group_name(grp);
        }
      }
    }
  }
}

TEST(Attention, MatchesPerEdgeOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const Case s = random_setup(rng);
    for (EdgeGroup grp : kEdgeGroups) {
      const Matrix a = attention_scores(s.head, s.z_obj, s.z_rel, s.g, grp);
      const Matrix expect = oracle::attention(s.head, s.z_obj, s.z_rel, s.g, grp);
      ASSERT_TRUE(a.same_shape(expect));
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.data()[k], expect.data()[k], 1e-12) << group_name(grp);
    }
  }
}

TEST(Attention, SingleNeighbourGetsWeightOne) {
  const HeteroGraph g{2, {{0, 1}}};
  Rng rng(43);
  const AttentionHead h{gen::random_matrix(4, 3, rng), gen::random_matrix(3, 1, rng)};
  const Matrix zo = gen::random_matrix(2, 2, rng), zr = gen::random_matrix(1, 2, rng);
  EXPECT_EQ(attention_scores(h, zo, zr, g, EdgeGroup::RelationSubject)(0, 0), 1.0);
  EXPECT_EQ(attention_scores(h, zo, zr, g, EdgeGroup::Skip), Matrix::from_rows({{1, 1}, {1, 1}}));
  const Matrix or_ = attention_scores(h, zo, zr, g, EdgeGroup::ObjectRelations);
  EXPECT_EQ(or_, Matrix::from_rows({{0}, {1}}));  // object 0 is nobody's object
}

TEST(Attention, ZeroWeightsGiveUniformAttention) {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    Case s = random_setup(rng);
    s.head = zero_attention_head(6, 4);
    Tape tape;
    for (EdgeGroup grp : kEdgeGroups) {
      EXPECT_EQ(attention_scores(s.head, s.z_obj, s.z_rel, s.g, grp), uniform_attention(tape, s.g, grp).value());
    }
  }
}

TEST(GcnLayer, VanillaReferenceOnPathGraph) {
  // Path 0-1-2-3 with symmetric normalised adjacency D^-1/2 A D^-1/2.
  const double r = 1.0 / std::sqrt(2.0);
  const Matrix alpha = Matrix::from_rows({{0, r, 0, 0}, {r, 0, 0.5, 0}, {0, 0.5, 0, r}, {0, 0, r, 0}});
  const Matrix z = Matrix::from_rows({{1}, {-1}, {2}, {0.5}});
  const Matrix out = gcn_layer(z, alpha, Matrix::from_rows({{2}}));
  EXPECT_EQ(out(0, 0), 0.0);  // relu(1 - sqrt 2)
  EXPECT_NEAR(out(1, 0), 1.0 + std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(out(2, 0), 1.0 + r, 1e-15);
  EXPECT_NEAR(out(3, 0), 0.5 + 2.0 * std::sqrt(2.0), 1e-15);
}

TEST(GcnLayer, EmptyNeighbourhoodAndZeroWeight) {
  Rng rng(45);
  const Matrix z = gen::random_matrix(3, 2, rng);
  Matrix relu_z = z;
  for (double& v : relu_z.data()) v = std::max(v, 0.0);
  EXPECT_EQ(gcn_layer(z, Matrix(3, 3), gen::random_matrix(2, 2, rng)), relu_z);
  EXPECT_EQ(gcn_layer(z, gen::random_matrix(3, 3, rng), Matrix(2, 2)), relu_z);
}

TEST(AgcnStep, MatchesScalarExpansion) {
  Rng rng(46);
  for (int trial = 0; trial < 30; ++trial) {
    const HeteroGraph g = gen::random_hetero_graph(3, 2, rng);
    const std::size_t d = 2;
    const Matrix zo = gen::random_matrix(3, d, rng), zr = gen::random_matrix(2, d, rng);
    const TypedTransforms w = random_typed_transforms(d, d, 1.0, rng);
    const AttentionHead h{gen::random_matrix(2 * d, 3, rng), gen::random_matrix(3, 1, rng)};
    Tape tape;
    const auto tv = bind(tape, w, false);
    const Var vo = tape.constant(zo), vr = tape.constant(zr);
    const AttentionVars a = attention_map(bind(tape, h, false), vo, vr, g);
    const Matrix obj = agcn_step_objects(tv, vo, vr, a).value();
    const Matrix rel = agcn_step_relations(tv, vo, vr, a).value();
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j)
          for (std::size_t k = 0; k < d; ++k) s += a.skip.value()(i, j) * zo(j, k) * w.w_skip(k, c);
        for (std::size_t r = 0; r < 2; ++r)
          for (std::size_t k = 0; k < d; ++k) {
            s += a.sr.value()(i, r) * zr(r, k) * w.w_sr(k, c);
            s += a.or_.value()(i, r) * zr(r, k) * w.w_or(k, c);
          }
        EXPECT_NEAR(obj(i, c), std::max(s, 0.0), 1e-12);
      }
    }
    for (std::size_t r = 0; r < 2; ++r) {
      const auto [subj, ob] = g.relations[r];
      for (std::size_t c = 0; c < d; ++c) {
        double s = zr(r, c);
        for (std::size_t k = 0; k < d; ++k) s += zo(subj, k) * w.w_rs(k, c) + zo(ob, k) * w.w_ro(k, c);
        EXPECT_NEAR(rel(r, c), std::max(s, 0.0), 1e-12);
      }
    }
  }
}

TEST(AgcnStep, ZeroTransforms) {
  Rng rng(47);
  const HeteroGraph g = gen::random_hetero_graph(4, 3, rng);
  Tape tape;
  const auto tv = bind(tape, zero_typed_transforms(2, 2), false);
  const Matrix zr = gen::random_matrix(3, 2, rng);
  const Var vo = tape.constant(gen::random_matrix(4, 2, rng)), vr = tape.constant(zr);
  const AttentionVars a = uniform_attention_map(tape, g);
  EXPECT_EQ(agcn_step_objects(tv, vo, vr, a).value(), Matrix(4, 2));
  Matrix relu_zr = zr;
  for (double& v : relu_zr.data()) v = std::max(v, 0.0);
  EXPECT_EQ(agcn_step_relations(tv, vo, vr, a).value(), relu_zr);
}

TEST(TwoLevel, SemanticLevelReusesVisualAttention) {
  Rng rng(48);
  for (int trial = 0; trial < 20; ++trial) {
    const HeteroGraph g = gen::random_hetero_graph(4, 3, rng);
    AgcnParams vis{random_typed_transforms(3, 3, 0.5, rng), {gen::random_matrix(6, 5, rng), gen::random_matrix(5, 1, rng)}};
    const TypedTransforms sem = random_typed_transforms(5, 2, 0.5, rng);
    Tape tape;
    const auto out = run_two_level(bind(tape, vis, false), bind(tape, sem, false), g,
                                   tape.constant(gen::random_matrix(4, 3, rng)), tape.constant(gen::random_matrix(3, 3, rng)),
                                   tape.constant(gen::random_matrix(4, 5, rng)), tape.constant(gen::random_matrix(3, 2, rng)), 2);
    ASSERT_EQ(out.visual_attention.size(), 2u);
    ASSERT_EQ(out.semantic_attention.size(), 2u);
    for (std::size_t l = 0; l < 2; ++l) {
      for (EdgeGroup grp : kEdgeGroups) {
        EXPECT_EQ(out.semantic_attention[l][grp].id, out.visual_attention[l][grp].id);
        EXPECT_EQ(out.semantic_attention[l][grp].value(), out.visual_attention[l][grp].value());
      }
    }
    // Layer 2 attention sees refined features, so it differs from layer 1.
    EXPECT_NE(out.visual_attention[0].skip.value(), out.visual_attention[1].skip.value());
  }
}

TEST(TwoLevel, DegenerateCases) {
  Rng rng(49);
  const HeteroGraph g = gen::random_hetero_graph(3, 2, rng);
  Tape tape;
  const auto zero_vis = bind(tape, AgcnParams{zero_typed_transforms(2, 2), zero_attention_head(4, 2)}, false);
  const auto zero_sem = bind(tape, zero_typed_transforms(3, 2), false);
  const Matrix lr = gen::random_matrix(2, 2, rng);
  const auto out = run_two_level(zero_vis, zero_sem, g, tape.constant(gen::random_matrix(3, 2, rng)),
                                 tape.constant(gen::random_matrix(2, 2, rng)), tape.constant(gen::random_matrix(3, 3, rng)),
                                 tape.constant(lr), 1);
  Matrix relu_lr = lr;
  for (double& v : relu_lr.data()) v = std::max(v, 0.0);
  EXPECT_EQ(out.predicate_logits.value(), relu_lr);
  EXPECT_EQ(out.object_logits.value(), Matrix(3, 3));

  // One object, no relations: only the self skip term acts.
  const HeteroGraph lone{1, {}};
  const TypedTransforms sem = random_typed_transforms(3, 2, 1.0, rng);
  const Matrix logits = gen::random_matrix(1, 3, rng);
  Tape t2;
  const auto out2 = run_two_level(bind(t2, AgcnParams{zero_typed_transforms(2, 2), zero_attention_head(4, 2)}, false),
                                  bind(t2, sem, false), lone, t2.constant(Matrix(1, 2)), t2.constant(Matrix(0, 2)),
                                  t2.constant(logits), t2.constant(Matrix(0, 2)), 1);
  Matrix expect = matmul(logits, sem.w_skip);
  for (double& v : expect.data()) v = std::max(v, 0.0);
  EXPECT_EQ(out2.object_logits.value(), expect);
  EXPECT_THROW(run_two_level(zero_vis, zero_sem, g, tape.constant(Matrix(3, 2)), tape.constant(Matrix(2, 2)),
                             tape.constant(Matrix(3, 3)), tape.constant(lr), 0),
               InputError);
}

TEST(ClassificationLosses, ValuesAndErrors) {
  Tape tape;
  const Var obj = tape.constant(Matrix(2, 4));
  const Var pred = tape.constant(Matrix::from_rows({{2.0, 0.0}}));
  const double expect = std::log(4.0) + (std::log(std::exp(2.0) + 1.0) - 0.0);
  EXPECT_NEAR(classification_losses(obj, pred, {0, std::nullopt}, {1}).value()(0, 0), expect, 1e-14);
  EXPECT_NEAR(classification_losses(obj, pred, {3, 1}, {std::nullopt}).value()(0, 0), std::log(4.0), 1e-14);
  EXPECT_THROW(classification_losses(obj, pred, {std::nullopt, std::nullopt}, {std::nullopt}), InputError);
  EXPECT_THROW(classification_losses(obj, pred, {0}, {1}), ShapeError);
}
