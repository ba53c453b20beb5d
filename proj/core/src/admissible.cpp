#include "funsearch/admissible.hpp"

#include <string>

#include "funsearch/errors.hpp"

namespace funsearch::kernels {

AdmissibleTuple::AdmissibleTuple(std::vector<std::int64_t> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i] < 0) {
      throw ValidationError("admissible tuple entries must be non-negative, got " +
                            std::to_string(entries_[i]));
    }
    if (i > 0 && entries_[i] <= entries_[i - 1]) {
      throw ValidationError("admissible tuple must be strictly increasing at position " +
                            std::to_string(i));
    }
  }
}

AdmissibleTuple AdmissibleTuple::normalize() const {
  if (entries_.empty()) return *this;
  std::vector<std::int64_t> shifted(entries_);
  const auto base = shifted.front();
  for (auto& e : shifted) e -= base;
  return AdmissibleTuple(std::move(shifted));
}

std::vector<std::int64_t> primes_up_to(std::int64_t limit) {
  std::vector<std::int64_t> primes;
  if (limit < 2) return primes;
  std::vector<char> composite(static_cast<std::size_t>(limit) + 1, 0);
  for (std::int64_t i = 2; i <= limit; ++i) {
    if (composite[i]) continue;
    primes.push_back(i);
    for (std::int64_t j = i * i; j <= limit; j += i) composite[j] = 1;
  }
  return primes;
}

bool verify_admissible(const AdmissibleTuple& t) {
  const auto k = static_cast<std::int64_t>(t.k());
  std::vector<char> seen;
  for (std::int64_t p : primes_up_to(k)) {
    seen.assign(static_cast<std::size_t>(p), 0);
    std::int64_t occupied = 0;
    for (std::int64_t e : t.entries()) {
      auto r = static_cast<std::size_t>(e % p);
      if (!seen[r]) {
        seen[r] = 1;
        if (++occupied == p) return false;
      }
    }
  }
  return true;
}

AdmissibleTuple sieve_solve(std::int64_t n, const ResidueChooser& priority) {
  if (n < 2) throw ValidationError("sieve bound must be >= 2, got " + std::to_string(n));
  std::vector<char> alive(static_cast<std::size_t>(n) + 1, 1);
  for (std::int64_t p : primes_up_to(n)) {
    std::int64_t r = 0;
    try {
      r = priority(p, n);
    } catch (const std::exception& e) {
      throw EvaluationError(std::string("residue chooser failed: ") + e.what());
    }
    r %= p;
    if (r < 0) r += p;
    for (std::int64_t x = r; x <= n; x += p) alive[x] = 0;
  }
  std::vector<std::int64_t> survivors;
  for (std::int64_t x = 0; x <= n; ++x) {
    if (alive[x]) survivors.push_back(x);
  }
  return AdmissibleTuple(std::move(survivors));
}

}  // namespace funsearch::kernels
