#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "graphdiff/builder.hpp"
#include "graphdiff/errors.hpp"
#include "graphdiff/inputgen.hpp"
#include "test_util.hpp"

using namespace graphdiff;
using graphdiff::test::TempDir;

namespace {

Graph gather_graph() {
  GraphBuilder b;
  int64_t data = b.input(TensorSpec{{4, 3}, DType::F32, true});
  int64_t idx = b.input(TensorSpec{{2, 3}, DType::I64, true});
  int64_t gathered = b.op(OpKind::Gather, {{data, 0}, {idx, 0}}, Attrs{{"dim", int64_t{0}}});
  b.output({gathered, 0});
  return b.take();
}

}  // namespace

TEST_CASE("float inputs stay inside the policy interval with the expected mean") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{1000}, DType::F64, true});
  b.output({b.op(OpKind::Relu, {{x, 0}}), 0});
  Graph g = b.take();
  InputPolicy policy;
  policy.seed = 99;
  auto tensors = generate_inputs(g, policy);
  REQUIRE(tensors.size() == 1);
  double sum = 0;
  for (int64_t i = 0; i < 1000; ++i) {
    const double v = tensors[0].get_f(i);
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    sum += v;
  }
  const double mean = sum / 1000.0;
  CHECK(mean > 0.45);
  CHECK(mean < 0.55);
}

TEST_CASE("index-feeding integer inputs use the index range") {
  Graph g = gather_graph();
  InputPolicy policy;
  policy.seed = 5;
  auto tensors = generate_inputs(g, policy);
  const Tensor& idx = tensors[1];
  for (int64_t i = 0; i < idx.count(); ++i) {
    CHECK(idx.get_i(i) >= 0);
    CHECK(idx.get_i(i) <= 4);
  }
}

TEST_CASE("non-index integer inputs use the wider range") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{64}, DType::I64, true});
  int64_t y = b.input(TensorSpec{{64}, DType::I64, true});
  b.output({b.op(OpKind::Add, {{x, 0}, {y, 0}}), 0});
  Graph g = b.take();
  InputPolicy policy;
  policy.seed = 6;
  auto tensors = generate_inputs(g, policy);
  bool above_index_range = false;
  for (const auto& t : tensors)
    for (int64_t i = 0; i < t.count(); ++i) {
      CHECK(t.get_i(i) >= 0);
      CHECK(t.get_i(i) <= 16);
      above_index_range |= t.get_i(i) > 4;
    }
  CHECK(above_index_range);  // would be vanishingly unlikely under [0,4]
}

TEST_CASE("offsets input is sorted and starts at zero") {
  GraphBuilder b;
  int64_t weight = b.constant(Tensor::full(TensorSpec{{5, 2}, DType::F32, true}, 0.5));
  int64_t indices = b.input(TensorSpec{{6}, DType::I64, true});
  int64_t offsets = b.input(TensorSpec{{4}, DType::I64, true});
  int64_t bag = b.op(OpKind::EmbeddingBag, {{weight, 0}, {indices, 0}, {offsets, 0}});
  b.output({bag, 0});
  Graph g = b.take();
  InputPolicy policy;
  policy.seed = 8;
  auto tensors = generate_inputs(g, policy);
  const Tensor& off = tensors[1];
  CHECK(off.get_i(0) == 0);
  for (int64_t i = 1; i < off.count(); ++i) CHECK(off.get_i(i) >= off.get_i(i - 1));
}

TEST_CASE("classification: direct index edge") {
  Graph g = gather_graph();
  auto classified = classify_index_inputs(g);
  CHECK(classified == std::set<int64_t>{g.inputs()[1]});
}

TEST_CASE("classification: data operand through arithmetic is not an index feed") {
  GraphBuilder b;
  int64_t x = b.input(TensorSpec{{4, 3}, DType::F32, true});
  int64_t noise = b.constant(Tensor::full(TensorSpec{{4, 3}, DType::F32, true}, 1.0));
  int64_t data = b.op(OpKind::Add, {{x, 0}, {noise, 0}});
  int64_t idx = b.input(TensorSpec{{2, 3}, DType::I64, true});
  b.output({b.op(OpKind::Gather, {{data, 0}, {idx, 0}}, Attrs{{"dim", int64_t{0}}}), 0});
  Graph g = b.take();
  auto classified = classify_index_inputs(g);
  CHECK(classified.count(x) == 0);
  CHECK(classified.count(idx) == 1);
}

TEST_CASE("classification walks through shape-only ops") {
  GraphBuilder b;
  int64_t data = b.constant(Tensor::full(TensorSpec{{6, 2}, DType::F32, true}, 1.0));
  int64_t raw = b.input(TensorSpec{{2, 2}, DType::I64, true});
  int64_t flat = b.op(OpKind::Reshape, {{raw, 0}}, Attrs{{"shape", std::vector<int64_t>{4}}});
  b.output({b.op(OpKind::IndexSelect, {{data, 0}, {flat, 0}}, Attrs{{"dim", int64_t{0}}}), 0});
  Graph g = b.take();
  CHECK(classify_index_inputs(g).count(raw) == 1);
}

TEST_CASE("offsets constraint through a slice is unsatisfiable") {
  GraphBuilder b;
  int64_t weight = b.constant(Tensor::full(TensorSpec{{5, 2}, DType::F32, true}, 0.5));
  int64_t indices = b.input(TensorSpec{{6}, DType::I64, true});
  int64_t raw = b.input(TensorSpec{{6}, DType::I64, true});
  int64_t sliced = b.op(OpKind::Slice, {{raw, 0}},
                        Attrs{{"dim", int64_t{0}}, {"start", int64_t{2}}, {"end", int64_t{5}}});
  b.output({b.op(OpKind::EmbeddingBag, {{weight, 0}, {indices, 0}, {sliced, 0}}), 0});
  Graph g = b.take();
  InputPolicy policy;
  CHECK_THROWS_AS((void)generate_inputs(g, policy), Error);
}

TEST_CASE("generation is bitwise deterministic") {
  Graph g = gather_graph();
  InputPolicy policy;
  policy.seed = 2024;
  auto a = generate_inputs(g, policy);
  auto b = generate_inputs(g, policy);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(Tensor::bit_identical(a[i], b[i]));
  CHECK(input_digest(a) == input_digest(b));
}

TEST_CASE("bool inputs are zero or one") {
  GraphBuilder b;
  int64_t m = b.input(TensorSpec{{32}, DType::Bool, true});
  b.output({b.op(OpKind::Where, {{m, 0}}, {}, 8), 0});
  Graph g = b.take();
  InputPolicy policy;
  policy.seed = 3;
  auto tensors = generate_inputs(g, policy);
  for (int64_t i = 0; i < tensors[0].count(); ++i) {
    CHECK(tensors[0].get_i(i) >= 0);
    CHECK(tensors[0].get_i(i) <= 1);
  }
}

TEST_CASE("generation never changes a requested dtype") {
  GraphBuilder b;
  int64_t f64 = b.input(TensorSpec{{4}, DType::F64, true});
  int64_t f32 = b.input(TensorSpec{{4}, DType::F32, true});
  int64_t i32 = b.input(TensorSpec{{4}, DType::I32, true});
  b.output({b.op(OpKind::Flatten, {{f64, 0}}), 0});
  b.output({b.op(OpKind::Flatten, {{f32, 0}}), 0});
  b.output({b.op(OpKind::Flatten, {{i32, 0}}), 0});
  Graph g = b.take();
  auto tensors = generate_inputs(g, InputPolicy{});
  for (size_t i = 0; i < tensors.size(); ++i)
    CHECK(tensors[i].spec().dtype == g.node(g.inputs()[i]).output_specs[0].dtype);
}

TEST_CASE("input bundle round-trips bitwise") {
  TempDir dir("bundle");
  Graph g = gather_graph();
  InputPolicy policy;
  policy.seed = 17;
  auto tensors = generate_inputs(g, policy);
  save_input_bundle(dir.path / "in.bin", g, policy, tensors);
  InputBundle bundle = load_input_bundle(dir.path / "in.bin");
  REQUIRE(bundle.tensors.size() == tensors.size());
  for (size_t i = 0; i < tensors.size(); ++i)
    CHECK(Tensor::bit_identical(bundle.tensors[i], tensors[i]));
  CHECK(bundle.policy.seed == 17);
}
