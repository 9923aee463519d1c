#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "basiscluster/data.hpp"
#include "basiscluster/errors.hpp"
#include "basiscluster/trainer.hpp"

using namespace basiscluster;
namespace fs = std::filesystem;

namespace {

DataMatrix tiny_toy() { return generate_five_cluster_toy(60, 2, 0.05, 77); }

TrainConfig tiny_config(std::size_t epochs = 15) {
  TrainConfig cfg;
  cfg.scheme = InferenceScheme::collapsed;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  cfg.restarts = 2;
  cfg.model.q = 1;
  cfg.model.k = 4;
  cfg.model.encoder_hidden = {16};
  cfg.model.decoder_hidden = {8};
  cfg.prior = PriorConfig::symmetric(0.1, 4, 1.0);
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("epochs=0 returns initialized parameters with the initial evaluation recorded") {
  DataMatrix data = tiny_toy();
  TrainConfig cfg = tiny_config(0);
  cfg.restarts = 1;
  TrainReport rep = train(data, cfg);
  REQUIRE(rep.trace.size() == 1);
  CHECK(rep.trace[0].step == 0);
  CHECK(std::isfinite(rep.trace[0].breakdown.total));
}

TEST_CASE("identical config and seed give bitwise-identical checkpoints") {
  DataMatrix data = tiny_toy();
  const fs::path dir = fs::temp_directory_path();
  const std::string a = (dir / "bc_det_a.bcl").string();
  const std::string b = (dir / "bc_det_b.bcl").string();

  TrainConfig cfg = tiny_config(6);
  cfg.checkpoint_path = a;
  train(data, cfg);
  cfg.checkpoint_path = b;
  train(data, cfg);
  CHECK(slurp(a) == slurp(b));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("thread count does not change results") {
  DataMatrix data = tiny_toy();
  const fs::path dir = fs::temp_directory_path();
  const std::string a = (dir / "bc_thr_1.bcl").string();
  const std::string b = (dir / "bc_thr_2.bcl").string();

  TrainConfig cfg = tiny_config(5);
  cfg.max_threads = 1;
  cfg.checkpoint_path = a;
  train(data, cfg);
  cfg.max_threads = 2;
  cfg.checkpoint_path = b;
  train(data, cfg);
  CHECK(slurp(a) == slurp(b));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("training improves the full-data objective") {
  DataMatrix data = tiny_toy();
  TrainConfig cfg = tiny_config(30);
  cfg.restarts = 1;

  TrainConfig init_cfg = cfg;
  init_cfg.epochs = 0;
  TrainReport init = train(data, init_cfg);
  TrainReport trained = train(data, cfg);

  Model m_init(init.model_config, init.params);
  Model m_trained(trained.model_config, trained.params);
  const double before = evaluate(data, m_init, cfg.prior, cfg.scheme).total;
  const double after = evaluate(data, m_trained, cfg.prior, cfg.scheme).total;
  CHECK(after > before);

  // smoothed trace at the end is above the start
  CHECK(trained.final_smoothed_total > trained.trace.front().breakdown.total);
}

TEST_CASE("evaluate is deterministic and matches the breakdown identity") {
  DataMatrix data = tiny_toy();
  TrainConfig cfg = tiny_config(3);
  cfg.restarts = 1;
  TrainReport rep = train(data, cfg);
  Model model(rep.model_config, rep.params);
  ElboBreakdown a = evaluate(data, model, cfg.prior, cfg.scheme);
  ElboBreakdown b = evaluate(data, model, cfg.prior, cfg.scheme);
  CHECK(a.total == b.total);
  CHECK(a.total == doctest::Approx(a.expected_loglik - a.beta * a.latent_kl +
                                   a.beta * (a.mixture_prior + a.assign_entropy) +
                                   a.map_penalty)
                       .epsilon(1e-12));
}

TEST_CASE("checkpoint round trip reproduces evaluate bitwise") {
  DataMatrix data = tiny_toy();
  TrainConfig cfg = tiny_config(4);
  cfg.restarts = 1;
  const std::string path = (fs::temp_directory_path() / "bc_rt.bcl").string();
  cfg.checkpoint_path = path;
  TrainReport rep = train(data, cfg);

  Model original(rep.model_config, rep.params);
  const double before = evaluate(data, original, cfg.prior, cfg.scheme).total;

  Checkpoint ckpt = load_checkpoint(path);
  Model restored(ckpt.model, std::move(ckpt.params));
  const double after = evaluate(data, restored, ckpt.prior, ckpt.scheme).total;
  CHECK(before == after);
  fs::remove(path);
}

TEST_CASE("best_of_restarts selection rules") {
  auto make = [](double total, bool failed) {
    TrainReport r;
    r.final_smoothed_total = total;
    r.failed = failed;
    return r;
  };
  std::vector<TrainReport> single = {make(1.0, false)};
  single[0].restart_index = 0;
  CHECK(&best_of_restarts(single) == &single[0]);

  std::vector<TrainReport> ties = {make(2.0, false), make(2.0, false)};
  ties[0].restart_index = 0;
  ties[1].restart_index = 1;
  CHECK(best_of_restarts(ties).restart_index == 0);

  std::vector<TrainReport> mixed = {make(3.0, false), make(7.0, false), make(5.0, false)};
  for (std::size_t i = 0; i < 3; ++i) mixed[i].restart_index = i;
  CHECK(best_of_restarts(mixed).restart_index == 1);

  // a failed restart never wins, even with the best total
  std::vector<TrainReport> with_fail = {make(3.0, false), make(100.0, true)};
  with_fail[0].restart_index = 0;
  with_fail[1].restart_index = 1;
  CHECK(best_of_restarts(with_fail).restart_index == 0);

  std::vector<TrainReport> empty;
  CHECK_THROWS_AS(best_of_restarts(empty), ShapeError);
  std::vector<TrainReport> all_failed = {make(1.0, true)};
  all_failed[0].diagnostic = "boom";
  CHECK_THROWS_AS(best_of_restarts(all_failed), NumericError);
}

TEST_CASE("non-finite data aborts restarts with a diagnostic") {
  DataMatrix data = tiny_toy();
  data.values.at2(0, 0) = std::nan("");
  TrainConfig cfg = tiny_config(2);
  auto reports = train_all_restarts(data, cfg);
  for (const auto& r : reports) {
    CHECK(r.failed);
    CHECK_FALSE(r.diagnostic.empty());
  }
  CHECK_THROWS_AS(best_of_restarts(reports), NumericError);
}

TEST_CASE("noncollapsed and fixed-pi schemes train end to end") {
  DataMatrix data = tiny_toy();
  for (auto scheme : {InferenceScheme::noncollapsed, InferenceScheme::fixed_pi}) {
    TrainConfig cfg = tiny_config(10);
    cfg.scheme = scheme;
    cfg.restarts = 1;
    TrainReport rep = train(data, cfg);
    CHECK_FALSE(rep.failed);
    CHECK(std::isfinite(rep.final_smoothed_total));
    if (scheme == InferenceScheme::noncollapsed) CHECK(rep.params.contains("psi_log"));
  }
}

TEST_CASE("batch size larger than N clamps instead of failing") {
  DataMatrix data = tiny_toy();
  TrainConfig cfg = tiny_config(2);
  cfg.batch_size = 100000;
  cfg.restarts = 1;
  TrainReport rep = train(data, cfg);
  CHECK_FALSE(rep.failed);
}

TEST_CASE("trace file carries the term columns") {
  DataMatrix data = tiny_toy();
  TrainConfig cfg = tiny_config(2);
  cfg.restarts = 1;
  TrainReport rep = train(data, cfg);
  const std::string path = (fs::temp_directory_path() / "bc_trace.tsv").string();
  write_trace(path, rep, 1);
  const std::string text = slurp(path);
  CHECK(text.find("expected_loglik") != std::string::npos);
  CHECK(text.find("mixture_prior") != std::string::npos);
  CHECK(text.find("total") != std::string::npos);
  fs::remove(path);
}
