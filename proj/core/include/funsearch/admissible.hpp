#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace funsearch::kernels {

/// Strictly increasing non-negative integers.
class AdmissibleTuple {
 public:
  AdmissibleTuple() = default;
  /// Throws ValidationError unless `entries` is strictly increasing and >= 0.
  explicit AdmissibleTuple(std::vector<std::int64_t> entries);

  const std::vector<std::int64_t>& entries() const { return entries_; }
  std::size_t k() const { return entries_.size(); }
  std::int64_t diameter() const { return entries_.empty() ? 0 : entries_.back() - entries_.front(); }
  bool normalized() const { return !entries_.empty() && entries_.front() == 0; }
  /// Translate so the first entry is 0.
  AdmissibleTuple normalize() const;

  friend bool operator==(const AdmissibleTuple&, const AdmissibleTuple&) = default;

 private:
  std::vector<std::int64_t> entries_;
};

/// Primes p <= limit in increasing order.
std::vector<std::int64_t> primes_up_to(std::int64_t limit);

/// True iff for every prime p <= k the entries miss some residue class mod p.
/// Primes above k cannot be covered by k integers and are not checked.
bool verify_admissible(const AdmissibleTuple& t);

/// Picks the residue class r to remove modulo prime p, for diameter bound n.
using ResidueChooser = std::function<std::int64_t(std::int64_t p, std::int64_t n)>;

/// Sieves [0, n]: for every prime p <= n, in increasing order, removes the
/// class (r mod p) chosen by `priority`. The survivors form an admissible
/// tuple of diameter <= n. Chooser exceptions become EvaluationError.
AdmissibleTuple sieve_solve(std::int64_t n, const ResidueChooser& priority);

}  // namespace funsearch::kernels
