#ifndef QSGS_IDENTITIES_HPP
#define QSGS_IDENTITIES_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace qsgs {

enum class CheckKind { Analytic, FiniteDifference };

inline double check_tolerance(CheckKind k) {
  return k == CheckKind::Analytic ? 1e-9 : 1e-6;
}

struct IdentityResult {
  std::string name;
  std::string family;  // vector-calculus, killing, structure
  CheckKind kind = CheckKind::Analytic;
  double tol = 0.0;
  double max_rel = 0.0;
  long count = 0;
  // Alternative sign or index pattern, recorded for comparison only. Its
  // outcome does not enter all_pass().
  bool variant = false;
  bool pass = false;
};

struct IdentitySuite {
  std::uint64_t seed = 0;
  int count = 0;
  std::vector<IdentityResult> results;

  bool all_pass() const;
  const IdentityResult* find(const std::string& name) const;
};

// Each identity is checked at `count` random configurations drawn from a
// generator seeded with `seed`. Errors are relative to the size of the terms.
IdentitySuite run_identity_suite(std::uint64_t seed, int count);

}  // namespace qsgs

#endif
