#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "forkscope/history.hpp"
#include "forkscope/vulnscan.hpp"

namespace fixtures {

struct VulnCase {
    std::string name;
    forkscope::RepoHistory history;
    forkscope::VulnSignature sig;
    // Set for hand-built cases whose verdict is known up front.
    std::optional<forkscope::VulnStatus> expected;
};

// memcpy without a bounds check, and the checked variant.
forkscope::VulnSignature overflow_signature();

// Hand-built scenarios: introduction and patch, still vulnerable, never
// present, same-commit patch, reflowed fragment, straddling fragment, a
// commit over the fallback file limit, renames, merges, non-source files.
std::vector<VulnCase> scripted_vuln_cases();

// Randomized histories mixing filler edits with fragment insertions,
// removals, partial fragments, wide commits, renames and merges.
VulnCase random_vuln_case(std::uint64_t seed, std::size_t commits, std::size_t files = 5);

// Linear history of `commits` commits over `files` large source files.
VulnCase long_vuln_case(std::uint64_t seed, std::size_t commits, std::size_t files, std::size_t functions_per_file);

}  // namespace fixtures
