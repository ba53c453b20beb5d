#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace funsearch::specfmt {

inline constexpr std::string_view kSystemPromptBegin = "### SYSTEM PROMPT";
inline constexpr std::string_view kSystemPromptEnd = "### END SYSTEM PROMPT";
inline constexpr std::string_view kRunDecorator = "@funsearch.run";
inline constexpr std::string_view kEvolveDecorator = "@funsearch.evolve";

/// A top-level function of a guest-language source file.
struct FunctionDef {
  std::string name;
  std::vector<std::string> params;  ///< parameter names, in order
  std::string signature;            ///< the `def ...:` header, possibly multi-line
  std::string docstring;            ///< docstring body without quotes, or empty
  std::string body_indent;          ///< indentation of the first body line
  std::vector<std::string> decorators;
  std::string text;                 ///< `def` header plus body, newline-terminated

  friend bool operator==(const FunctionDef&, const FunctionDef&) = default;
};

struct ProblemSpec {
  std::optional<std::string> system_prompt;
  std::string header;      ///< module docstring and imports before the first function
  std::string run_entry;   ///< name of the run-decorated function
  FunctionDef evolve_target;
  std::string fixed_body;  ///< everything after the header except the evolved function
  std::string raw_text;

  /// Source up to (and including decorators of) the evolved function, and
  /// everything after it. assemble = prefix + function + suffix.
  std::string prefix;
  std::string suffix;
};

struct PromptProgram {
  std::string id;
  std::string source;  ///< a single function definition
  double score = 0.0;
  std::uint64_t registered_at = 0;
};

struct PromptBundle {
  std::string system_prompt;
  std::string user_prompt;
  std::vector<std::pair<std::string, double>> source_programs;  ///< ascending score
  int expected_next_version = 0;
};

enum class Origin { seed, model, scripted };

struct CandidateCode {
  std::string source;           ///< full guest program
  std::string priority_source;  ///< evolved function alone
  Origin origin = Origin::seed;
  std::string model;            ///< producing model, when origin == model
  std::vector<std::string> parent_ids;
};

std::string to_string(Origin o);

/// Throws FormatError for a wrong number of evolve/run decorators.
ProblemSpec parse_spec(std::string_view text);
ProblemSpec load_spec(const std::string& path);

/// Parses text that must hold exactly one top-level function (decorators
/// allowed and recorded). Throws FormatError otherwise.
FunctionDef parse_single_function(std::string_view text);

/// Renames identifier tokens equal to `from` (outside strings and comments).
std::string rename_identifier(std::string_view source, std::string_view from, std::string_view to);

std::string default_system_prompt(const ProblemSpec& spec);

/// Sorts by (score, registered_at), renames the k-th function to
/// priority_v{k}, strips decorators and appends the header of the next
/// version. `max_programs` is the configured prompt size.
PromptBundle build_prompt(const ProblemSpec& spec, std::vector<PromptProgram> programs,
                          std::size_t max_programs = 2);

/// First function whose name starts with `name_prefix`, after removing code
/// fences, renamed to `canonical_name`. nullopt when none is found.
std::optional<std::string> extract_function(std::string_view response, std::string_view name_prefix,
                                            std::string_view canonical_name);

/// Splices `priority_source` in place of the evolved function. Throws
/// FormatError if it is not a single function of matching arity.
CandidateCode assemble_candidate(const ProblemSpec& spec, std::string_view priority_source,
                                 Origin origin, std::vector<std::string> parents,
                                 std::string model = {});

}  // namespace funsearch::specfmt
