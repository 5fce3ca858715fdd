#ifndef TSNET_ERRORS_HPP
#define TSNET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tsnet {

struct NotInTimeScale : std::runtime_error {
    explicit NotInTimeScale(double t)
        : std::runtime_error("point " + std::to_string(t) + " is not a member of the time scale") {}
};

struct EmptyWindow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotRegressive : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotInTranslationSet : std::runtime_error {
    explicit NotInTranslationSet(double tau)
        : std::runtime_error("shift " + std::to_string(tau) + " is not in the translation lattice") {}
};

struct NonpositiveWeight : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parse failure; `offset` is the byte position in the source string.
struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(std::size_t off, const std::string& what_arg)
        : std::runtime_error("parse error at offset " + std::to_string(off) + ": " + what_arg),
          offset(off) {}
};

/// Evaluation hit an undefined real operation (log/sqrt of a negative,
/// division by zero, fractional power of a negative base).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonpositiveDecay : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CertificateUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotContractive : std::runtime_error {
    double rho;
    explicit NotContractive(double r)
        : std::runtime_error("contraction factor " + std::to_string(r) + " >= 1"), rho(r) {}
};

struct MaxIterExceeded : std::runtime_error {
    double last_delta;
    MaxIterExceeded(int iters, double delta)
        : std::runtime_error("no convergence after " + std::to_string(iters) +
                             " iterations, last delta " + std::to_string(delta)),
          last_delta(delta) {}
};

struct WindowTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TailBoundUnachievable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HistoryIncomplete : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DelayedLookupMiss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace tsnet

#endif
