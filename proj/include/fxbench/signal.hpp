#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fxbench {

enum class Direction { kUp, kDown };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct ForecastSignal {
  std::size_t index = 0;          // series position of emission
  std::int64_t timestamp_ms = 0;
  Direction direction = Direction::kUp;
  double intensity = 0.0;         // in [-3, 3]; sign matches direction
  std::string model_label;
};

// Turns a per-tick intensity stream into emitted signals. Shared by the
// custom ANN and the LSTM baselines so signal counts stay comparable.
//
// A tick emits when |intensity| >= threshold and one of:
//   - nothing has been emitted yet,
//   - the direction flipped versus the last emitted signal,
//   - |intensity| crossed the robust boundary (1.0) from below since the
//     previous tick.
class EmissionPolicy {
 public:
  explicit EmissionPolicy(double threshold, double robust_boundary = 1.0);

  std::optional<ForecastSignal> step(std::size_t index, std::int64_t timestamp_ms,
                                     double intensity, const std::string& model_label);

 private:
  double threshold_;
  double boundary_;
  bool emitted_any_ = false;
  Direction last_direction_ = Direction::kUp;
  double prev_abs_ = 0.0;  // |intensity| at the previous tick
};

// Signal log CSV: "index,timestamp_ms,direction,intensity,model_label".
// Comment lines ("# ...") carry the environment descriptor and evaluation
// parameters; readers skip them.
void write_signal_csv(const std::vector<ForecastSignal>& signals,
                      const std::vector<std::string>& comment_lines,
                      std::ostream& out);
std::vector<ForecastSignal> read_signal_csv(std::istream& in);
std::vector<ForecastSignal> read_signal_csv_file(const std::string& path);

}  // namespace fxbench
