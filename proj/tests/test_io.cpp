#include "fie/io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <unistd.h>

#include <fstream>
#include <sstream>
#include <string>

using namespace fie;
using fie::testing::random_matrix;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("fie_io_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("CSV round trip is bit exact") {
    TempDir dir;
    Matrix m = random_matrix(7, 4, 1, 1e3);
    m(0, 0) = 1.0 / 3.0;
    m(1, 1) = -0.0;
    m(2, 2) = 5e-310;
    io::write_matrix_csv(dir.path / "m.csv", m);
    const Matrix back = io::read_matrix_csv(dir.path / "m.csv");
    CHECK(back == m);
    CHECK(slurp(dir.path / "m.csv").find("-0,") == std::string::npos);
  }

  TEST_CASE("CSV parse errors carry the line number") {
    TempDir dir;
    CHECK(error_of([&] { io::read_matrix_csv(dir.write("a.csv", "1,2\n3,x\n")); })
              .find("a.csv:2") != std::string::npos);
    CHECK(error_of([&] { io::read_matrix_csv(dir.write("b.csv", "1,2\n\n3\n")); })
              .find("b.csv:3") != std::string::npos);
    CHECK(error_of([&] { io::read_matrix_csv(dir.write("c.csv", "1,nan\n")); })
              .find("c.csv:1") != std::string::npos);
    CHECK(error_of([&] { io::read_matrix_csv(dir.path / "missing.csv"); })
              .find("missing.csv") != std::string::npos);
    CHECK_FALSE(error_of([&] { io::read_matrix_csv(dir.write("e.csv", "")); }).empty());
  }

  TEST_CASE("edges are symmetrized and deduplicated on load") {
    TempDir dir;
    const auto edges = dir.write("g.tsv", "0\t1\n1\t0\n# comment\n\n1\t2\n2\t2\n");
    const auto feats = dir.write("x.csv", "0\n1\n2\n3\n");
    const SparseGraph g = io::load_graph(edges, feats);
    CHECK(g.num_nodes == 4);
    CHECK(g.targets.size() == 4);
    CHECK(g.neighbors(3).empty());
    CHECK(error_of([&] { io::read_edges(dir.write("bad.tsv", "0\t1\n0 1\n")); })
              .find("bad.tsv:2") != std::string::npos);
    CHECK(error_of([&] { io::load_graph(dir.write("far.tsv", "0\t9\n"), feats); })
              .find("far.tsv") != std::string::npos);
  }

  TEST_CASE("labels and splits") {
    TempDir dir;
    const auto labels = dir.write("labels.csv", "0,1\n2,0\n3,1\n");
    fs::create_directories(dir.path / "splits");
    dir.write("splits/train.txt", "0\n2\n");
    dir.write("splits/test.txt", "3\n");
    const LabeledSplit s = io::read_split(labels, dir.path / "splits", 4);
    CHECK(s.labels == std::vector<int>{1, -1, 0, 1});
    CHECK(s.train == std::vector<Index>{0, 2});
    CHECK(s.val.empty());
    CHECK(s.test == std::vector<Index>{3});

    dir.write("splits/test.txt", "1\n");
    CHECK_THROWS_AS(io::read_split(labels, dir.path / "splits", 4), InputError);
    CHECK(error_of([&] { io::read_labels(dir.write("dup.csv", "0,1\n0,2\n"), 4); })
              .find("dup.csv:2") != std::string::npos);
    CHECK_THROWS_AS(io::read_labels(labels, 2), InputError);
  }

  TEST_CASE("model directories round trip") {
    TempDir dir;
    FieModel model;
    model.input_dim = 3;
    LayerConfig a;
    a.components = 2;
    a.em_iters = 4;
    a.estep.variant = EstepVariant::UnbalancedOT;
    a.estep.epsilon = 0.25;
    a.estep.tau2 = 3.5;
    LayerConfig b;
    b.components = 1;
    b.include_self = false;
    b.nonlinearity = Nonlinearity::ReLU;
    model.layers.push_back({a, AnchorSet{random_matrix(2, 3, 5)}});
    model.layers.push_back({b, AnchorSet{random_matrix(1, 6, 6)}});
    io::save_model(dir.path / "m", model);
    CHECK(fs::exists(dir.path / "m" / "anchors_1.csv"));
    CHECK(fs::exists(dir.path / "m" / "anchors_2.csv"));

    const FieModel back = io::load_model(dir.path / "m");
    REQUIRE(back.layers.size() == 2);
    CHECK(back.input_dim == 3);
    CHECK(back.layers[0].anchors.means == model.layers[0].anchors.means);
    CHECK(back.layers[1].anchors.means == model.layers[1].anchors.means);
    CHECK(back.layers[0].config.estep.variant == EstepVariant::UnbalancedOT);
    CHECK(back.layers[0].config.estep.epsilon == 0.25);
    CHECK(back.layers[0].config.estep.tau2 == 3.5);
    CHECK(std::isinf(back.layers[0].config.estep.tau1));
    CHECK(back.layers[0].config.em_iters == 4);
    CHECK_FALSE(back.layers[1].config.include_self);
    CHECK(back.layers[1].config.nonlinearity == Nonlinearity::ReLU);

    const std::string first = slurp(dir.path / "m" / "model.json");
    io::save_model(dir.path / "m", back);
    CHECK(slurp(dir.path / "m" / "model.json") == first);
    CHECK_THROWS_AS(io::load_model(dir.path / "nope"), InputError);
  }
}
