#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace iwatsuka {

// Recorded: a measurement with no inequality attached (stress runs, scans).
enum class CheckStatus { Pass, Fail, Vacuous, Recorded, Skipped };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Vacuous: return "vacuous";
    case CheckStatus::Recorded: return "recorded";
    case CheckStatus::Skipped: return "skipped";
  }
  return "unknown";
}

// Outcome of one numerical verification. `observed` and `bound` are in the
// units of the inequality being tested; `ratio` is observed/bound oriented so
// that ratio >= 1 means the inequality holds (NaN when not meaningful).
struct CheckReport {
  std::string id;
  std::string anchor;
  CheckStatus status = CheckStatus::Skipped;
  double observed = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
  std::string note;

  bool ok() const { return status != CheckStatus::Fail; }
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, long index = -1)
      : std::runtime_error(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

class TheoremCheckFailure : public std::runtime_error {
 public:
  explicit TheoremCheckFailure(CheckReport r)
      : std::runtime_error(r.id + ": " + r.note), report_(std::move(r)) {}
  const CheckReport& report() const { return report_; }

 private:
  CheckReport report_;
};

}  // namespace iwatsuka
