#include <cmath>
#include <complex>
#include <vector>

#include <tripod/closed.hpp>
#include <tripod/drive.hpp>
#include <tripod/errors.hpp>
#include <tripod/model.hpp>
#include <tripod/numeric.hpp>
#include <tripod/propagate.hpp>
#include <tripod/random.hpp>

#include "doctest.h"
#include "helpers.hpp"

using namespace tripod;
using Cx = std::complex<double>;

namespace {

const double kSt = std::sin(kPi / 8.0);
const double kCt = std::cos(kPi / 8.0);

std::vector<StateVector> axial_states() {
  const double r = 1.0 / std::sqrt(2.0);
  return {StateVector::basis(kIdx0),
          StateVector::basis(kIdx1),
          StateVector::qubit(r, r),
          StateVector::qubit(r, -r),
          StateVector::qubit(r, Cx(0.0, r)),
          StateVector::qubit(r, Cx(0.0, -r))};
}

}  // namespace

TEST_CASE("qubit gate: Hadamard point, identity point, unitarity") {
  const Eigen::Matrix2cd had = gate_matrix(kPi / 8.0, kPi, -kPi);
  Eigen::Matrix2cd ref;
  const double r = 1.0 / std::sqrt(2.0);
  ref << r, r, r, -r;
  CHECK((had - ref).cwiseAbs().maxCoeff() < 1e-12);

  const Eigen::Matrix2cd id = gate_matrix(0.7, 2.1, 0.0);
  CHECK((id - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  RngStream rng(99);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Matrix2cd u =
        gate_matrix(kPi * rng.uniform(), 2.0 * kPi * rng.uniform(),
                    4.0 * kPi * (rng.uniform() - 0.5));
    CHECK((u.adjoint() * u - Eigen::Matrix2cd::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("full sequence realizes the ideal gate on every axial state") {
  const auto s = testutil::reference_schedule();
  const Integration grid;
  for (const auto& psi : axial_states()) {
    const ClosedRun run = run_closed(psi, s, grid);
    const StateVector ideal = ideal_final_state(psi, s);
    CHECK(distance_up_to_phase(run.final_state.amps, ideal.amps) < 1e-3);
    CHECK(run.max_pe < 1e-3);
    CHECK(run.t.front() == s.t_initial());
    CHECK(run.t.back() == s.t_final());
    CHECK(run.t.size() == run.populations.size());
  }

  // Hadamard sends (|0> + |1>)/sqrt(2) to |0>.
  const double r = 1.0 / std::sqrt(2.0);
  const ClosedRun plus = run_closed(StateVector::qubit(r, r), s, grid);
  CHECK(distance_up_to_phase(plus.final_state.amps,
                             StateVector::basis(kIdx0).amps) < 1e-3);
}

TEST_CASE("dark-frame ledgers: dark 2 is phase-free, dark 1 picks up the "
          "geometric phase") {
  const auto s = testutil::reference_schedule();
  const Integration grid;

  const DarkRun d2 = propagate_dark(StateVector::qubit(kCt, kSt), s, grid);
  CHECK(std::abs(d2.c_d2_final - Cx(1.0, 0.0)) < 1e-3);
  CHECK(std::abs(d2.c_d1_final) < 1e-3);
  CHECK(d2.max_bright_population < 1e-3);

  const DarkRun d1 = propagate_dark(StateVector::qubit(-kSt, kCt), s, grid);
  const double gamma = geometric_phase(s);
  CHECK(std::abs(d1.c_d1_final - std::polar(1.0, gamma)) < 1e-3);
  CHECK(std::abs(d1.c_d2_final) < 1e-3);
  CHECK(gamma == doctest::Approx(-kPi).epsilon(1e-9));
}

TEST_CASE("initial |0> splits over the darks with the mixing-angle weights") {
  const auto s = testutil::reference_schedule();
  const DarkRun run = propagate_dark(StateVector::basis(kIdx0), s, {});
  REQUIRE(!run.trace.empty());
  const DarkSample& first = run.trace.front();
  CHECK(first.t == s.t_initial());
  CHECK(std::abs(first.c_d1) == doctest::Approx(kSt).epsilon(1e-12));
  CHECK(std::abs(first.c_d2) == doctest::Approx(kCt).epsilon(1e-12));
  CHECK(std::abs(run.c_d1_final) == doctest::Approx(kSt).epsilon(1e-3));
  CHECK(std::abs(run.c_d2_final) == doctest::Approx(kCt).epsilon(1e-3));
}

TEST_CASE("adiabaticity guard trips when the threshold is unrealistic") {
  const auto s = testutil::weak_schedule();
  CHECK_THROWS_AS(
      propagate_dark(StateVector::basis(kIdx0), s, testutil::weak_grid(),
                     1e-12),
      AdiabaticityError);
}

TEST_CASE("phase quadratures are additive over a split interval") {
  const auto s = testutil::reference_schedule();
  const double mid = 2.3;
  const double whole = geometric_phase(s);
  const double split = geometric_phase(s, s.t_initial(), mid) +
                       geometric_phase(s, mid, s.t_final());
  CHECK(std::abs(whole - split) < 1e-12);

  const double q_whole = integral_rabi_norm(s, s.t_initial(), s.t_final());
  const double q_split = integral_rabi_norm(s, s.t_initial(), mid) +
                         integral_rabi_norm(s, mid, s.t_final());
  CHECK(std::abs(q_whole - q_split) < 1e-9 * std::abs(q_whole));
  CHECK(q_whole > 0.0);
}
