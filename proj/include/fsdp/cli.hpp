#pragma once
// Experiment harness behind the factored_sdp executable.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fsdp/errors.hpp"
#include "fsdp/objective.hpp"

namespace fsdp::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

/// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what);
  std::size_t line;  // 1-based
};

/// One "i j k" triplet per line, 0-based; '#' lines and blank lines skipped.
std::vector<Triplet> parse_triplets(std::istream& in);
void write_triplets(std::ostream& out, const std::vector<Triplet>& t);

struct Planted {
  std::vector<std::vector<double>> coords;  // p points in dim dimensions
  std::vector<Triplet> triplets;
};

/// Points on a square grid ("grid", dim 2 only) or i.i.d. Gaussian; triplets
/// ordered by the true distances, each flipped with probability noise.
Planted plant_triplets(std::size_t p, std::size_t dim, std::size_t count, double noise, std::uint64_t seed,
                       const std::string& layout);

/// Random partition; the first part holds round(frac * size) triplets.
std::pair<std::vector<Triplet>, std::vector<Triplet>> split_triplets(const std::vector<Triplet>& t, double frac,
                                                                     std::uint64_t seed);

}  // namespace fsdp::cli
