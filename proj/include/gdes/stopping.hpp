#pragma once

#include <optional>
#include <vector>

namespace gdes {

// Two patience flavors: stop after p increases since the start of training
// (t1), or after p consecutive increases (t2). An "increase" is a strictly
// larger value than the previous epoch's; the first observation never
// counts.
enum class ThresholdKind { AnyIncrease, ConsecutiveIncrease };

struct PatiencePolicy {
    int patience = 5;
    ThresholdKind kind = ThresholdKind::AnyIncrease;
};

enum class StopDecision { Continue, Stop };

// Pure fold state for one monitored series.
struct StopState {
    std::optional<double> previous;
    int total_increases = 0;
    int run_length = 0;
    std::optional<int> stopped_at;

    bool stopped() const { return stopped_at.has_value(); }
};

// Feeds one epoch's value; epochs must arrive in increasing order. Once the
// state stops it stays stopped and stopped_at never changes.
StopDecision observe(StopState& state, const PatiencePolicy& policy, int epoch, double value);

// Convenience: runs a whole series (epochs labeled 1..n) and reports the
// stop epoch, if any.
std::optional<int> stop_epoch(const std::vector<double>& series, const PatiencePolicy& policy);

struct OutcomeStats {
    double mean = 0.0;
    double stddev = 0.0;
};

// Threshold sensitivity: sum over sets of std/mean. Lower is more robust.
double sensitivity(const std::vector<OutcomeStats>& sets);

// Earliest index of the minimum value (the oracle a stopping rule chases).
std::size_t oracle_best_epoch(const std::vector<double>& series);

}  // namespace gdes
