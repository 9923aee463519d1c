#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "basiscluster/checkpoint.hpp"
#include "basiscluster/data.hpp"
#include "basiscluster/elbo.hpp"
#include "basiscluster/model.hpp"

namespace basiscluster {

struct TrainConfig {
  InferenceScheme scheme = InferenceScheme::collapsed;
  std::size_t epochs = 200;
  std::size_t batch_size = 128;  // clamped to N
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t restarts = 1;
  ModelConfig model;
  PriorConfig prior;          // alpha expanded to length K by validate_against
  std::size_t log_every = 10;  // thinning for the trace file written by the CLI
  std::size_t max_threads = 0;  // 0 = hardware limit; BASISCLUSTER_THREADS caps further
  std::string checkpoint_path;  // written by train() when nonempty

  void validate_against(const DataMatrix& data);
};

struct TraceEntry {
  std::size_t step = 0;   // 0 is the pre-training evaluation
  std::size_t epoch = 0;
  ElboBreakdown breakdown;
};

struct TrainReport {
  std::vector<TraceEntry> trace;
  ModelConfig model_config;
  ParamStore params;
  std::string rng_state;
  double wall_time_sec = 0.0;
  std::size_t restart_index = 0;
  bool failed = false;
  std::string diagnostic;
  double final_smoothed_total = 0.0;  // window-20 moving average at the end
};

// Full-data objective with a single fixed-seed z draw per datum; no gradients.
ElboBreakdown evaluate(const DataMatrix& data, Model& model, const PriorConfig& prior,
                       InferenceScheme scheme, std::uint64_t eval_seed = 0x45564131ULL);

// All restarts, each on an independent rng stream derived from (seed, index).
// Restarts run in parallel up to the thread cap; a restart whose objective
// goes non-finite is marked failed (with a diagnostic) and the others proceed.
std::vector<TrainReport> train_all_restarts(const DataMatrix& data, TrainConfig config);

// Report maximizing the final smoothed total; ties -> lowest restart index.
// Failed restarts never win; an all-failed (or empty) list is an error.
const TrainReport& best_of_restarts(const std::vector<TrainReport>& reports);

// train_all_restarts + best_of_restarts, plus the optional checkpoint write.
TrainReport train(const DataMatrix& data, TrainConfig config);

// Writes "step<TAB>epoch<TAB>terms...<TAB>total" rows, thinned by log_every
// (step 0 and the last step always included).
void write_trace(const std::string& path, const TrainReport& report, std::size_t log_every);

std::size_t resolve_thread_cap(std::size_t restarts, std::size_t config_max);

}  // namespace basiscluster
