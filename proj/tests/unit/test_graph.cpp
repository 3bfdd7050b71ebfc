#include <gtest/gtest.h>

#include <filesystem>

#include "../support.hpp"

using namespace sgg;

namespace {

SceneGraph two_node_graph() {
  SceneGraph g;
  g.objects.push_back({{0, 0, 10, 10}, {1.0, 2.0}, {0.25, 0.75}, {}});
  g.objects.push_back({{5, 5, 10, 10}, {3.0, 4.0}, {0.5, 0.5}, {}});
  g.edges.push_back({0, 1, {0.1, 0.9}, 0.25, {}});
  return g;
}

}  // namespace

TEST(Box, IouKnownValues) {
  const Box a{0, 0, 10, 10};
  EXPECT_EQ(box_iou(a, a), 1.0);
  EXPECT_EQ(box_iou(a, {20, 20, 5, 5}), 0.0);
  EXPECT_EQ(box_iou(a, {10, 0, 10, 10}), 0.0);  // touching edges
  EXPECT_NEAR(box_iou(a, {5, 0, 10, 10}), 50.0 / 150.0, 1e-15);
  EXPECT_EQ(union_box(a, {5, 5, 10, 10}), (Box{0, 0, 15, 15}));
}

TEST(Box, IouIsSymmetricAndBounded) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const Box a = gen::random_box(rng), b = gen::random_box(rng);
    const double v = box_iou(a, b);
    EXPECT_EQ(v, box_iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SceneGraphModel, ValidGraphPasses) { EXPECT_NO_THROW(validate(two_node_graph(), 2, 2)); }

TEST(SceneGraphModel, RejectsSelfRelation) {
  SceneGraph g = two_node_graph();
  g.edges[0].object = 0;
  try {
    validate(g);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "edges[0]");
    EXPECT_NE(std::string(e.what()).find("self-relation"), std::string::npos);
  }
}

TEST(SceneGraphModel, RejectsDuplicatePairAndBadDistributions) {
  SceneGraph g = two_node_graph();
  g.edges.push_back(g.edges[0]);
  EXPECT_THROW(validate(g), SchemaError);
  g = two_node_graph();
  g.objects[1].class_dist = {0.5, 0.6};
  EXPECT_THROW(validate(g), SchemaError);
  g = two_node_graph();
  g.objects[0].box.w = 0.0;
  EXPECT_THROW(validate(g), SchemaError);
  g = two_node_graph();
  EXPECT_THROW(validate(g, 3), SchemaError);
  g.edges[0].subject = 7;
  EXPECT_THROW(validate(g), SchemaError);
}

TEST(SceneGraphModel, GroundTruthChecks) {
  GroundTruthGraph gt;
  gt.objects = {{{0, 0, 1, 1}, 0, {}}, {{2, 2, 1, 1}, 1, {}}};
  gt.triplets = {{0, 0, 1}};
  EXPECT_NO_THROW(validate(gt, 2, 1));
  gt.triplets.push_back({0, 0, 1});
  EXPECT_THROW(validate(gt), SchemaError);
  gt.triplets = {{0, 3, 1}};
  EXPECT_THROW(validate(gt, 2, 2), SchemaError);
  gt.triplets = {{1, 0, 1}};
  EXPECT_THROW(validate(gt), SchemaError);
}

TEST(SceneGraphModel, ArgmaxTakesLowestIndexOnTies) {
  EXPECT_EQ(argmax({0.25, 0.5, 0.25, 0.5}), 1u);
  SceneGraph g = two_node_graph();
  EXPECT_EQ(object_label(g, 1), 0);
  g.object_labels = {1, 1};
  EXPECT_EQ(object_label(g, 0), 1);
}

TEST(GraphIo, SceneGraphRoundTripIsExact) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    SceneGraph g;
    g.objects = gen::random_proposals(2 + rng.below(4), 3, 4, rng);
    for (std::size_t i = 0; i + 1 < g.objects.size(); ++i) {
      g.edges.push_back({i, i + 1, gen::random_distribution(3, rng), rng.uniform(), {rng.normal(), rng.normal()}});
    }
    const std::string text = dump(to_json(g));
    const SceneGraph back = scene_graph_from_json(json::parse(text));
    EXPECT_EQ(back, g);
    EXPECT_EQ(dump(to_json(back)), text);
  }
}

TEST(GraphIo, GroundTruthAndVocabularyRoundTrip) {
  Rng rng(9);
  GroundTruthGraph gt = gen::random_ground_truth(5, 4, 3, 2, rng);
  gt.objects[2].attributes = {1, 4};
  EXPECT_EQ(ground_truth_from_json(to_json(gt)), gt);
  EXPECT_TRUE(std::holds_alternative<GroundTruthGraph>(graph_from_json(to_json(gt))));
  const Vocabulary v{{"a", "b"}, {"on"}};
  EXPECT_EQ(vocabulary_from_json(to_json(v)), v);
}

TEST(GraphIo, UnknownAndMissingFieldsNameTheirPath) {
  json j = to_json(two_node_graph());
  j["edges"][0]["weight"] = 1.0;
  try {
    scene_graph_from_json(j);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "edges[0].weight");
  }
  j = to_json(two_node_graph());
  j["objects"][1].erase("class_dist");
  try {
    scene_graph_from_json(j);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "objects[1].class_dist");
  }
}

TEST(GraphIo, LogitsAreNormalisedOnRequest) {
  json j = to_json(two_node_graph());
  j["objects"][0]["class_dist"] = {0.0, 0.0};
  j["edges"][0]["predicate_dist"] = {3.0, -1.0};
  EXPECT_THROW(scene_graph_from_json(j), SchemaError);
  LoadOptions opts;
  opts.logits = true;
  const SceneGraph g = scene_graph_from_json(j, opts);
  EXPECT_EQ(g.objects[0].class_dist, (std::vector<double>{0.5, 0.5}));
  EXPECT_NEAR(g.edges[0].predicate_dist[0], 1.0 / (1.0 + std::exp(-4.0)), 1e-15);
}

TEST(GraphIo, FixturesLoad) {
  const std::filesystem::path dir = SGG_FIXTURES "/worked_example";
  const Vocabulary v = load_vocabulary(dir / "vocab.json");
  LoadOptions opts{false, v.object_classes.size(), v.predicate_classes.size()};
  EXPECT_EQ(load_ground_truth(dir / "gt.json", opts).triplets.size(), 3u);
  EXPECT_EQ(load_scene_graph(dir / "pred" / "d.json", opts).objects.size(), 5u);
  EXPECT_THROW(load_scene_graph(dir / "missing.json"), InputError);
}
