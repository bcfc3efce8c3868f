#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "reinverify/drlp/parser.hpp"
#include "reinverify/solver.hpp"

namespace reinverify {

enum class SearchMethod { Linear, Binary, Iterative };

SearchMethod search_method_from_string(const std::string& s);
const char* search_method_text(SearchMethod m);

struct VarSpec {
    double lower_bound = 0;
    double upper_bound = 0;
    double precision = 0;
    SearchMethod method = SearchMethod::Binary;
    double iterative_step = 2.0;  // multiplier, > 1
};

/// Per-variable search ranges. Variables are processed in the template's
/// declaration order: every variable but the last is stepped linearly, the
/// last uses its configured method.
struct SearchSpec {
    std::map<std::string, VarSpec> vars;
};

struct Breakpoint {
    drlp::Script concrete_script;  // concretized at the bracket's upper end
    Status from_status = Status::Unknown;
    Status to_status = Status::Unknown;
    double value_lo = 0;
    double value_hi = 0;
    std::string variable;
    std::map<std::string, double> slice;  // outer variables' values
};

using VerifyFn = std::function<VerifyResult(const drlp::Script&)>;

struct SearchReport {
    std::vector<Breakpoint> breakpoints;
    std::vector<std::string> aborted_slices;  // slices hitting Unknown verdicts
    long probe_count = 0;
};

SearchReport find_breakpoints(const drlp::Template& tmpl, const SearchSpec& spec,
                              const VerifyFn& verify_fn);

struct SliceSummary {
    std::map<std::string, double> slice;
    int flips = 0;
    std::vector<double> extracted_values;  // bracket midpoints
};

struct BreaklineSummary {
    std::map<std::string, std::vector<SliceSummary>> by_variable;
    int total = 0;
    bool monotone = true;  // every slice has at most one flip
};

BreaklineSummary analyze_breakpoints(const std::vector<Breakpoint>& bps);

}  // namespace reinverify
