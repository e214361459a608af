#include "natsel/record.hpp"

#include "natsel/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace natsel {

std::string reconstruct(const std::vector<Step>& steps) {
    std::string out;
    std::size_t total = 0;
    for (const auto& s : steps) total += s.text.size();
    out.reserve(total);
    for (const auto& s : steps) out += s.text;
    return out;
}

WindowPolicy WindowPolicy::fixed_k(int k) {
    WindowPolicy p;
    p.kind = Kind::fixed;
    p.k = k;
    p.validate();
    return p;
}

WindowPolicy WindowPolicy::fractional(double fraction) {
    WindowPolicy p;
    p.kind = Kind::fraction;
    p.k = 0;
    p.fraction = fraction;
    p.validate();
    return p;
}

WindowPolicy WindowPolicy::full() {
    WindowPolicy p;
    p.kind = Kind::full;
    p.k = 0;
    return p;
}

WindowPolicy WindowPolicy::parse(std::string_view text) {
    if (text == "full") return full();
    const auto colon = text.find(':');
    const auto head = text.substr(0, colon);
    if (colon != std::string_view::npos && head == "fixed") {
        const auto tail = text.substr(colon + 1);
        int k = 0;
        const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), k);
        if (ec != std::errc() || ptr != tail.data() + tail.size()) {
            throw ValidationError("invalid window policy: '" + std::string(text) + "'");
        }
        return fixed_k(k);
    }
    if (colon != std::string_view::npos && head == "fraction") {
        const auto tail = std::string(text.substr(colon + 1));
        char* end = nullptr;
        const double f = std::strtod(tail.c_str(), &end);
        if (end != tail.c_str() + tail.size() || tail.empty()) {
            throw ValidationError("invalid window policy: '" + std::string(text) + "'");
        }
        return fractional(f);
    }
    throw ValidationError("invalid window policy: '" + std::string(text) +
                          "' (expected fixed:K, fraction:F or full)");
}

std::string WindowPolicy::to_string() const {
    switch (kind) {
    case Kind::fixed:
        return "fixed:" + std::to_string(k);
    case Kind::fraction: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "fraction:%g", fraction);
        return buf;
    }
    case Kind::full:
        return "full";
    }
    return "full";
}

int WindowPolicy::window_for_step(int step_index) const {
    const int preceding = step_index - 1;
    if (preceding <= 0) return 0;
    switch (kind) {
    case Kind::fixed:
        return std::min(k, preceding);
    case Kind::fraction:
        return std::min(static_cast<int>(std::ceil(fraction * preceding)), preceding);
    case Kind::full:
        return preceding;
    }
    return preceding;
}

void WindowPolicy::validate() const {
    if (kind == Kind::fixed && k < 0) {
        throw ValidationError("window policy: fixed requires k >= 0");
    }
    if (kind == Kind::fraction && !(fraction > 0.0 && fraction <= 1.0)) {
        throw ValidationError("window policy: fraction must be in (0, 1]");
    }
}

void ScoreRecord::validate() const {
    const auto where = prompt_id + "/" + teacher_id + "/" + std::to_string(candidate_index);
    if (token_count <= 0) throw ValidationError("score record " + where + ": token_count must be positive");
    if (std::isnan(global_lp) || std::isinf(global_lp)) {
        throw ValidationError("score record " + where + ": non-finite global_lp");
    }
    if (global_lp > 0.0) throw ValidationError("score record " + where + ": global_lp > 0");
    if (step_lps.empty()) throw ValidationError("score record " + where + ": empty step_lps");
    long double sum = 0.0L;
    for (double v : step_lps) {
        if (std::isnan(v) || std::isinf(v)) {
            throw ValidationError("score record " + where + ": non-finite step_lp");
        }
        if (v > 0.0) throw ValidationError("score record " + where + ": step_lp > 0");
        sum += v;
    }
    const double mean = static_cast<double>(sum / static_cast<long double>(step_lps.size()));
    const double tol = 1e-12 * std::max(1.0, std::fabs(mean));
    if (std::fabs(local_lp - mean) > tol) {
        throw ValidationError("score record " + where + ": local_lp is not the mean of step_lps");
    }
    window_policy.validate();
}

} // namespace natsel
