#include "gdes/stopping.hpp"

#include "gdes/errors.hpp"

namespace gdes {

StopDecision observe(StopState& state, const PatiencePolicy& policy, int epoch, double value) {
    if (policy.patience < 1) throw ConfigError("patience must be at least 1");
    if (state.stopped()) return StopDecision::Stop;

    if (state.previous.has_value()) {
        if (value > *state.previous) {
            state.total_increases += 1;
            state.run_length += 1;
        } else {
            state.run_length = 0;
        }
    }
    state.previous = value;

    const int counter = (policy.kind == ThresholdKind::AnyIncrease) ? state.total_increases
                                                                    : state.run_length;
    if (counter >= policy.patience) {
        state.stopped_at = epoch;
        return StopDecision::Stop;
    }
    return StopDecision::Continue;
}

std::optional<int> stop_epoch(const std::vector<double>& series, const PatiencePolicy& policy) {
    StopState state;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (observe(state, policy, static_cast<int>(i) + 1, series[i]) == StopDecision::Stop)
            break;
    }
    return state.stopped_at;
}

double sensitivity(const std::vector<OutcomeStats>& sets) {
    double acc = 0.0;
    for (const OutcomeStats& set : sets) {
        if (set.mean == 0.0) throw NumericError("sensitivity undefined for zero mean");
        acc += set.stddev / set.mean;
    }
    return acc;
}

std::size_t oracle_best_epoch(const std::vector<double>& series) {
    if (series.empty()) throw ConfigError("empty series");
    std::size_t best = 0;
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i] < series[best]) best = i;
    return best;
}

}  // namespace gdes
