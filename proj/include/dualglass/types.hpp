#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dualglass {

using Vec3 = Eigen::Vector3d;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle into [0, 2pi).
inline double wrap_2pi(double a)
{
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

enum class ReturnChannel : std::uint8_t { strongest, last };

/// Point classes: inside obstacle, glass, reflection, outside obstacle, unknown.
enum class Label : std::uint8_t { I, G, R, O, U };

inline char label_char(Label l)
{
  switch (l) {
    case Label::I: return 'I';
    case Label::G: return 'G';
    case Label::R: return 'R';
    case Label::O: return 'O';
    case Label::U: return 'U';
  }
  return '-';
}

inline std::optional<Label> label_from_char(char c)
{
  switch (c) {
    case 'I': return Label::I;
    case 'G': return Label::G;
    case 'R': return Label::R;
    case 'O': return Label::O;
    case 'U': return Label::U;
    default: return std::nullopt;
  }
}

// Error hierarchy. The CLI maps these onto exit codes.

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Structurally invalid data handed to an operation (bad ring id, mixed grids).
struct MalformedInput : InputError {
  using InputError::InputError;
};

/// DRPC / pose / registry file parse failure. `record` is the 0-based data
/// record index, or -1 for header lines; `line` is the 1-based file line.
struct ParseError : InputError {
  ParseError(const std::string& what, long line, long record)
      : InputError(what + " (line " + std::to_string(line) +
                   (record >= 0 ? ", record " + std::to_string(record) : std::string()) + ")"),
        line(line), record(record)
  {}
  long line;
  long record;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace dualglass
