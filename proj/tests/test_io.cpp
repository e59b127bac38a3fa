#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "dissipkit/pipeline.hpp"

using namespace dissipkit;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("dissipkit_io_") + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

json reparse(const json& j) { return json::parse(j.dump()); }

}  // namespace

TEST(Json, KernelRoundTrip) {
  const LinearRadialKernel a(RadialProfile::matern(2.5, 0.7), 2, 1, Eigen::Vector3d(1.0, 0.3, 2.0 / 3.0));
  const auto b = io::kernel_from_json(reparse(io::to_json(a)));
  EXPECT_EQ(b.profile().family(), ProfileFamily::Matern);
  EXPECT_EQ(b.profile().smoothness(), 2.5);
  EXPECT_EQ(b.profile().lengthscale(), 0.7);
  EXPECT_EQ(b.weights(), a.weights());
  EXPECT_EQ(b.d_x(), 2);
  EXPECT_EQ(b.d_u(), 1);
  EXPECT_THROW(io::kernel_from_json(json{{"family", "gaussian"}}), InputError);
}

TEST(Json, FormRoundTripIsExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  MatrixXd X(6, 2), L(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int k = 0; k < 2; ++k) X(i, k) = u(rng);
    for (int k = 0; k < 6; ++k) L(i, k) = u(rng);
  }
  const KernelQuadraticForm f(LinearRadialKernel(RadialProfile::gaussian(1.3), 2, 0), X, L * L.transpose());
  const io::StorageFile s = io::storage_from_json(reparse(io::to_json(f)));
  ASSERT_TRUE(s.form.has_value());
  EXPECT_EQ(s.form->anchors(), f.anchors());
  EXPECT_EQ(s.form->theta(), f.theta());
  const Eigen::Vector2d x(0.2, -0.9);
  EXPECT_EQ(s(x), f(x));
}

TEST(Json, NamedStorage) {
  const auto s = io::storage_from_json(json{{"kind", "named"}, {"name", "case1_exact"}});
  const Eigen::Vector2d x(0.5, 1.0);
  EXPECT_EQ(s(x), poly1_exact_storage(x));
  EXPECT_THROW(io::storage_from_json(json{{"kind", "named"}, {"name", "other"}}), InputError);
  EXPECT_THROW(io::storage_from_json(json{{"kind", "table"}}), InputError);
  EXPECT_THROW(io::storage_from_json(json{{"kind", "kernel_form"}}), InputError);
}

TEST(Json, MatrixRejectsRaggedRows) {
  EXPECT_THROW(io::matrix_from_json(json::parse("[[1,2],[3]]"), "m"), InputError);
  EXPECT_THROW(io::matrix_from_json(json::parse("[[1,\"a\"]]"), "m"), InputError);
  EXPECT_EQ(io::matrix_from_json(json::parse("[[1,2],[3,4]]"), "m")(1, 0), 3.0);
}

TEST(Dataset, CsvRoundTripIsExact) {
  TempDir tmp;
  const auto d = sample_trajectories(BenchmarkSystem(SystemId::Poly1), 3, 4, Box({{-2, 2}, {-2, 2}}),
                                     Box({{-1, 1}}), 11);
  const std::string path = tmp.file("data.csv");
  io::write_dataset(path, d);
  const auto e = io::read_dataset(path);
  EXPECT_EQ(e.X, d.X);
  EXPECT_EQ(e.U, d.U);
  EXPECT_EQ(e.Xp, d.Xp);
  ASSERT_TRUE(e.Y.has_value());
  EXPECT_EQ(*e.Y, *d.Y);
  EXPECT_EQ(e.seed, 11u);
  EXPECT_EQ(e.system, "poly1");
  EXPECT_EQ(e.provenance.kind, Provenance::Kind::Trajectories);
  EXPECT_EQ(e.provenance.length, 4);
}

TEST(Dataset, WithoutSidecarIsExternal) {
  TempDir tmp;
  const std::string path = tmp.file("ext.csv");
  io::write_text(path, "x0,x1,u0,xp0,xp1\n1,2,3,4,5\n0.5, -1 ,0,0,0\n");
  const auto d = io::read_dataset(path);
  EXPECT_EQ(d.provenance.kind, Provenance::Kind::External);
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.X(1, 1), -1.0);
  EXPECT_FALSE(d.Y.has_value());
}

TEST(Dataset, MalformedFilesNameTheLine) {
  TempDir tmp;
  const std::string path = tmp.file("bad.csv");
  io::write_text(path, "x0,x1,u0,xp0,xp1\n1,2,3,4\n");
  try {
    io::read_dataset(path);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  io::write_text(path, "x0,x1,u0,xp0,xp1\n1,2,3,4,abc\n");
  EXPECT_THROW(io::read_dataset(path), InputError);
  io::write_text(path, "x0,u0\n1,2\n");
  EXPECT_THROW(io::read_dataset(path), InputError);
  EXPECT_THROW(io::read_dataset(tmp.file("missing.csv")), InputError);
}

TEST(Sdp, ProblemRoundTrip) {
  SdpProblem p;
  p.dim = 2;
  p.cost = MatrixXd::Identity(2, 2);
  p.constraints.push_back(SdpConstraint::rank_two(Eigen::Vector2d(1, 0.5), Eigen::Vector2d(0, 1), 0.25));
  p.constraints.push_back(SdpConstraint::dense(-MatrixXd::Identity(2, 2), -1.0));
  p.trace_cap = 10.0;
  const SdpProblem q = io::sdp_from_json(reparse(io::to_json(p)));
  EXPECT_EQ(q.dim, 2);
  EXPECT_EQ(q.cost, p.cost);
  ASSERT_EQ(q.constraints.size(), 2u);
  EXPECT_EQ(q.constraints[0].A, p.constraints[0].A);
  EXPECT_EQ(q.constraints[1].rhs, -1.0);
  EXPECT_EQ(q.trace_cap, p.trace_cap);
  const auto a = solve(p), b = solve(q);
  EXPECT_EQ(a.status, b.status);
  EXPECT_NEAR(a.objective, b.objective, 1e-9);
}

TEST(Reports, ViolationJsonAndCsv) {
  const auto d = sample_trajectories(BenchmarkSystem(SystemId::Poly1), 2, 3, Box({{-2, 2}, {-2, 2}}),
                                     Box({{-1, 1}}), 2);
  auto r = residuals([](const VectorXd& x) { return x.squaredNorm(); }, case1_supply(0.25), d);
  r.epsilon_s_proxy = 0.1;
  const json j = io::to_json(r);
  EXPECT_EQ(j["n"], 6);
  EXPECT_EQ(j["violations"], r.violations());
  EXPECT_TRUE(j.contains("epsilon_s_note"));
  const std::string csv = io::report_csv(r, d);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x0,x1,u0,znorm,w,w_scaled,violated");
}

TEST(Reports, GridCsvShape) {
  const std::string csv = io::grid_csv([](const VectorXd& x) { return x(0); }, Box({{0, 1}, {0, 2}}), 5);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
  EXPECT_THROW(io::grid_csv([](const VectorXd&) { return 0.0; }, Box({{0, 1}}), 1), InputError);
}

TEST(Format, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.718281828459045, 1e-300, 6.02214076e23}) {
    EXPECT_EQ(std::stod(io::fmt(v)), v);
  }
}
