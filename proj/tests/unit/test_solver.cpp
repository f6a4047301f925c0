#include <doctest.h>

#include "facmdp/solver.hpp"

#include <cmath>

using namespace facmdp;

TEST_CASE("lp solve with pinned dual sign convention") {
  // min 2x + 3y  s.t.  x + y >= 10,  x - y <= 2,  0 <= x,y <= 20
  LinearModel m;
  int x = m.add_var(0.0, 20.0, VarType::Continuous, "x", 2.0);
  int y = m.add_var(0.0, 20.0, VarType::Continuous, "y", 3.0);
  m.add_row({{x, 1.0}, {y, 1.0}}, Sense::GE, 10.0);
  m.add_row({{x, 1.0}, {y, -1.0}}, Sense::LE, 2.0);
  auto out = solve_lp(m);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(24.0));
  CHECK(out.primal[static_cast<size_t>(x)] == doctest::Approx(6.0));
  CHECK(out.primal[static_cast<size_t>(y)] == doctest::Approx(4.0));
  // minimization duals: nonnegative on >= rows, nonpositive on <= rows,
  // and the objective gradient decomposes as A' dual here because both
  // variables sit strictly inside their bounds
  REQUIRE(out.row_duals.size() == 2);
  CHECK(out.row_duals[0] == doctest::Approx(2.5).epsilon(1e-7));
  CHECK(out.row_duals[1] == doctest::Approx(-0.5).epsilon(1e-7));
  REQUIRE(out.reduced_cost.size() == 2);
  CHECK(std::abs(out.reduced_cost[0]) < 1e-7);
  CHECK(std::abs(out.reduced_cost[1]) < 1e-7);
  // complementary slackness at both active rows
  double slack0 = out.primal[0] + out.primal[1] - 10.0;
  double slack1 = out.primal[0] - out.primal[1] - 2.0;
  CHECK(std::abs(out.row_duals[0] * slack0) < 1e-7);
  CHECK(std::abs(out.row_duals[1] * slack1) < 1e-7);
}

TEST_CASE("lp objective offset and maximization") {
  LinearModel m;
  m.maximize = true;
  m.obj_offset = 5.0;
  int x = m.add_var(0.0, 3.0, VarType::Continuous, "x", 2.0);
  m.add_row({{x, 1.0}}, Sense::LE, 2.0);
  auto out = solve_lp(m);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(9.0));
}

TEST_CASE("infeasible and unbounded statuses") {
  LinearModel inf;
  int x = inf.add_var(0.0, 1.0, VarType::Continuous, "x");
  inf.add_row({{x, 1.0}}, Sense::GE, 2.0);
  CHECK(solve_lp(inf).status == SolveStatus::Infeasible);

  LinearModel unb;
  unb.maximize = true;
  unb.add_var(0.0, std::numeric_limits<double>::infinity(), VarType::Continuous, "x", 1.0);
  CHECK(solve_lp(unb).status == SolveStatus::Unbounded);

  LinearModel mip_inf;
  int z = mip_inf.add_var(0.0, 1.0, VarType::Binary, "z");
  mip_inf.add_row({{z, 2.0}}, Sense::EQ, 1.0);
  CHECK(solve_mip(mip_inf).status == SolveStatus::Infeasible);
}

TEST_CASE("mip knapsack finds the integral optimum") {
  // max 10a + 13b + 7c  s.t.  4a + 5b + 3c <= 7
  LinearModel m;
  m.maximize = true;
  int a = m.add_var(0.0, 1.0, VarType::Binary, "a", 10.0);
  int b = m.add_var(0.0, 1.0, VarType::Binary, "b", 13.0);
  int c = m.add_var(0.0, 1.0, VarType::Binary, "c", 7.0);
  m.add_row({{a, 4.0}, {b, 5.0}, {c, 3.0}}, Sense::LE, 7.0);
  auto out = solve_mip(m);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(17.0));
  CHECK(out.primal[static_cast<size_t>(a)] == doctest::Approx(1.0));
  CHECK(out.primal[static_cast<size_t>(b)] == doctest::Approx(0.0));
  CHECK(out.primal[static_cast<size_t>(c)] == doctest::Approx(1.0));
}

TEST_CASE("objective target accepts any strictly better incumbent") {
  LinearModel m;
  m.maximize = true;
  for (int i = 0; i < 12; ++i) m.add_var(0.0, 1.0, VarType::Binary, "x" + std::to_string(i), 1.0);
  std::vector<std::pair<int, double>> all;
  for (int i = 0; i < 12; ++i) all.emplace_back(i, 1.0);
  m.add_row(all, Sense::LE, 9.0);
  SolveParams p;
  p.objective_target = 3.0;
  auto out = solve_mip(m, p);
  REQUIRE(out.has_solution());
  CHECK(out.objective > 3.0);
}

TEST_CASE("warm start is accepted") {
  LinearModel m;
  m.maximize = true;
  int a = m.add_var(0.0, 1.0, VarType::Binary, "a", 3.0);
  int b = m.add_var(0.0, 1.0, VarType::Binary, "b", 2.0);
  m.add_row({{a, 1.0}, {b, 1.0}}, Sense::LE, 1.0);
  SolveParams p;
  p.warm_start = std::vector<double>{1.0, 0.0};
  auto out = solve_mip(m, p);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(3.0));
}

TEST_CASE("session reuses the model across appended rows") {
  // max x + y, x,y in [0,4]; rows arrive one at a time
  LinearModel m;
  m.maximize = true;
  int x = m.add_var(0.0, 4.0, VarType::Continuous, "x", 1.0);
  int y = m.add_var(0.0, 4.0, VarType::Continuous, "y", 1.0);
  SolverSession sess(m);
  auto out = sess.solve();
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(8.0));
  sess.add_rows({ModelRow{{{x, 1.0}, {y, 1.0}}, Sense::LE, 5.0, ""}});
  out = sess.solve();
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(5.0));
  CHECK(sess.row_count() == 1);
  sess.add_rows({ModelRow{{{x, 1.0}}, Sense::LE, 2.0, ""}, ModelRow{{{y, 1.0}}, Sense::LE, 1.5, ""}});
  out = sess.solve();
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.objective == doctest::Approx(3.5));
  CHECK(sess.row_count() == 3);
}

TEST_CASE("fixing an incumbent recovers shadow prices") {
  // max 5z + x  s.t.  z + x <= 1.5, x <= 1, z binary
  LinearModel m;
  m.maximize = true;
  int z = m.add_var(0.0, 1.0, VarType::Binary, "z", 5.0);
  int x = m.add_var(0.0, 10.0, VarType::Continuous, "x", 1.0);
  m.add_row({{z, 1.0}, {x, 1.0}}, Sense::LE, 1.5);
  auto mip = solve_mip(m);
  REQUIRE(mip.status == SolveStatus::Optimal);
  CHECK(mip.objective == doctest::Approx(5.5));
  auto lp = fix_and_resolve_lp(m, mip.primal);
  REQUIRE(lp.status == SolveStatus::Optimal);
  CHECK(lp.objective == doctest::Approx(5.5));
  REQUIRE(lp.row_duals.size() == 1);
  // maximization dual on an active <= row is nonnegative
  CHECK(lp.row_duals[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("lp format export names the parts") {
  LinearModel m;
  int x = m.add_var(0.0, 2.0, VarType::Continuous, "x", 1.0);
  int z = m.add_var(0.0, 1.0, VarType::Binary, "z", -1.0);
  m.add_row({{x, 1.0}, {z, 3.0}}, Sense::LE, 2.5, "cap");
  auto text = write_lp_format(m);
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("cap") != std::string::npos);
  CHECK(text.find("x") != std::string::npos);
  bool has_int_section =
      text.find("Binary") != std::string::npos || text.find("General") != std::string::npos;
  CHECK(has_int_section);
}

TEST_CASE("backend name resolves") { CHECK(solver_backend_name() == "highs"); }
