#include "basiscluster/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "basiscluster/errors.hpp"

namespace basiscluster {

void TrainConfig::validate_against(const DataMatrix& data) {
  data.validate();
  if (data.n() == 0 || data.p() == 0) throw ShapeError("train: empty data");
  model.p = data.p();
  model.validate();
  if (restarts < 1) throw ShapeError("train: restarts must be >= 1");
  if (!(learning_rate > 0.0)) throw ShapeError("train: learning_rate must be > 0");
  if (batch_size == 0) throw ShapeError("train: batch_size must be >= 1");
  batch_size = std::min(batch_size, data.n());
  if (prior.alpha.empty()) prior = PriorConfig::symmetric(0.1, model.k, prior.beta);
  if (prior.alpha.size() == 1 && model.k > 1)
    prior.alpha.assign(model.k, prior.alpha[0]);
  prior.validate(model.k);
  if (model.likelihood == Likelihood::zinb && data.hint != LikelihoodHint::counts)
    throw DataError("train: zinb likelihood requires count data");
}

std::size_t resolve_thread_cap(std::size_t restarts, std::size_t config_max) {
  std::size_t hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t cap = config_max > 0 ? config_max : hw;
  if (const char* env = std::getenv("BASISCLUSTER_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && v > 0) cap = std::min<std::size_t>(cap, v);
  }
  return std::max<std::size_t>(1, std::min(cap, restarts));
}

ElboBreakdown evaluate(const DataMatrix& data, Model& model, const PriorConfig& prior,
                       InferenceScheme scheme, std::uint64_t eval_seed) {
  SeededRng rng(eval_seed);
  return objective(scheme, data.values, data.n(), model, prior, rng, /*with_grad=*/false);
}

namespace {

NdArray gather_rows(const NdArray& values, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end) {
  const std::size_t p = values.dim(1);
  NdArray out({end - begin, p});
  for (std::size_t r = begin; r < end; ++r)
    std::copy(values.data() + order[r] * p, values.data() + (order[r] + 1) * p,
              out.data() + (r - begin) * p);
  return out;
}

double smoothed_total(const std::vector<TraceEntry>& trace, std::size_t window = 20) {
  if (trace.empty()) return 0.0;
  const std::size_t take = std::min(window, trace.size());
  double acc = 0.0;
  for (std::size_t i = trace.size() - take; i < trace.size(); ++i)
    acc += trace[i].breakdown.total;
  return acc / static_cast<double>(take);
}

TrainReport run_restart(const DataMatrix& data, const TrainConfig& cfg, std::size_t restart) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.restart_index = restart;
  report.model_config = cfg.model;

  SeededRng rng = SeededRng::stream(cfg.seed, restart);
  Model model(cfg.model, rng);
  if (cfg.scheme == InferenceScheme::noncollapsed) ensure_psi(model);

  const std::size_t n = data.n();
  AdamConfig adam;
  adam.lr = cfg.learning_rate;
  adam.maximize = true;

  try {
    // step-0 entry so epochs=0 still yields a nonempty trace
    report.trace.push_back({0, 0, evaluate(data, model, cfg.prior, cfg.scheme)});

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      // Fisher-Yates shuffle from the restart stream
      for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
      }
      for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
        const std::size_t end = std::min(begin + cfg.batch_size, n);
        NdArray batch = gather_rows(data.values, order, begin, end);
        ElboBreakdown bd =
            objective(cfg.scheme, batch, n, model, cfg.prior, rng, /*with_grad=*/true);
        ++step;
        adam_step(model.params(), adam, step);
        report.trace.push_back({step, epoch, bd});
      }
    }
  } catch (const NumericError& e) {
    report.failed = true;
    report.diagnostic = std::string("restart ") + std::to_string(restart) + " aborted: " +
                        e.what();
  }

  report.params = model.params();
  report.rng_state = rng.serialize();
  report.final_smoothed_total = smoothed_total(report.trace);
  report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

std::vector<TrainReport> train_all_restarts(const DataMatrix& data, TrainConfig config) {
  config.validate_against(data);
  const std::size_t r = config.restarts;
  std::vector<TrainReport> reports(r);
  const std::size_t threads = resolve_thread_cap(r, config.max_threads);

  if (threads <= 1) {
    for (std::size_t i = 0; i < r; ++i) reports[i] = run_restart(data, config, i);
    return reports;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= r) return;
        reports[i] = run_restart(data, config, i);
      }
    });
  }
  for (auto& th : pool) th.join();
  return reports;
}

const TrainReport& best_of_restarts(const std::vector<TrainReport>& reports) {
  if (reports.empty()) throw ShapeError("best_of_restarts: empty report list");
  const TrainReport* best = nullptr;
  for (const auto& rep : reports) {
    if (rep.failed) continue;
    if (!best || rep.final_smoothed_total > best->final_smoothed_total) best = &rep;
  }
  if (!best) {
    std::string why = reports.front().diagnostic;
    throw NumericError("all restarts failed; first diagnostic: " + why);
  }
  return *best;
}

TrainReport train(const DataMatrix& data, TrainConfig config) {
  config.validate_against(data);
  auto reports = train_all_restarts(data, config);
  TrainReport best = best_of_restarts(reports);
  if (!config.checkpoint_path.empty()) {
    Checkpoint ckpt;
    ckpt.model = best.model_config;
    ckpt.scheme = config.scheme;
    ckpt.prior = config.prior;
    ckpt.rng_state = best.rng_state;
    ckpt.params = best.params;
    save_checkpoint(config.checkpoint_path, ckpt);
  }
  return best;
}

void write_trace(const std::string& path, const TrainReport& report, std::size_t log_every) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open trace file for writing: " + path);
  os << "step\tepoch\texpected_loglik\tmixture_prior\tassign_entropy\tlatent_kl\tmap_penalty\t"
        "total\n";
  if (log_every == 0) log_every = 1;
  char buf[64];
  for (std::size_t i = 0; i < report.trace.size(); ++i) {
    const TraceEntry& e = report.trace[i];
    if (e.step % log_every != 0 && i + 1 != report.trace.size()) continue;
    os << e.step << '\t' << e.epoch;
    const double vals[6] = {e.breakdown.expected_loglik, e.breakdown.mixture_prior,
                            e.breakdown.assign_entropy,  e.breakdown.latent_kl,
                            e.breakdown.map_penalty,     e.breakdown.total};
    for (double v : vals) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << '\t' << buf;
    }
    os << '\n';
  }
  if (!os) throw DataError("failed writing trace: " + path);
}

}  // namespace basiscluster
