#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace distmean {

/// The four test protocols supported by the cluster and the harness.
enum class Method { CenHotelling, DisHotelling, CenSign, DisSign };

inline constexpr std::array<Method, 4> all_methods = {
    Method::CenHotelling, Method::DisHotelling, Method::CenSign, Method::DisSign};

inline const char* method_name(Method m) {
    switch (m) {
        case Method::CenHotelling: return "cen-hotelling";
        case Method::DisHotelling: return "dis-hotelling";
        case Method::CenSign: return "cen-sign";
        case Method::DisSign: return "dis-sign";
    }
    return "unknown";
}

inline Method method_from_name(const std::string& name) {
    for (Method m : all_methods) {
        if (name == method_name(m)) return m;
    }
    throw std::invalid_argument("unknown method name: " + name);
}

/// Outcome of a single hypothesis test.
///
/// `statistic` is the raw statistic (T^2 or G). `normalized` is the quantity
/// actually compared against `threshold`: the F-scaled T^2 for the centralized
/// Hotelling test, the standardized absolute deviation for the distributed
/// one, and the studentized G for the sign tests.
struct TestDecision {
    double statistic = 0.0;
    double normalized = 0.0;
    double threshold = 0.0;
    double p_value = 1.0;
    bool reject = false;
    Method method = Method::CenHotelling;
    double alpha = 0.05;
};

/// File and parse failures (CSV ingestion, report emission). Mapped to a
/// dedicated process exit code by the CLI.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace distmean
