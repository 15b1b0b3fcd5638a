#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "tracesynth/pipeline.hpp"

using namespace tracesynth;

namespace {

std::shared_ptr<ExecutionBackend> make_backend(const PipelineConfig& config, std::shared_ptr<const Dataset> dataset) {
  auto sim = std::make_shared<SimulatedBackend>(dataset);
  if (config.backend == "simulated") return sim;
  MockAdapter::Recorder recorder;
  if (config.mock_record) {
    recorder = [sim](const std::string& sql) { return sim->execute(parse_sql(sql)); };
  }
  auto adapter = std::make_shared<MockAdapter>(config.mock_dir, recorder);
  return std::make_shared<AdapterBackend>(adapter, sim);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven SQL workload synthesis"};
  app.require_subcommand(1);

  auto* gen_data = app.add_subcommand("gen-data", "generate a synthetic star-schema dataset");
  int tables = 4;
  int64_t rows = 5000;
  uint64_t seed = 0;
  std::string out;
  gen_data->add_option("--tables", tables)->check(CLI::PositiveNumber);
  gen_data->add_option("--rows", rows)->check(CLI::PositiveNumber);
  gen_data->add_option("--seed", seed);
  gen_data->add_option("--out", out)->required();

  auto* profile = app.add_subcommand("profile", "fit the local cost model on random profiling queries");
  std::string catalog_dir;
  int queries = 200;
  bool gbdt = false;
  profile->add_option("--catalog", catalog_dir)->required();
  profile->add_option("--queries", queries)->check(CLI::PositiveNumber);
  profile->add_option("--seed", seed);
  profile->add_flag("--gbdt", gbdt, "gradient-boosted join regressor");
  profile->add_option("--out", out)->required();

  auto* synth = app.add_subcommand("synth", "synthesize a workload for a trace");
  std::string trace_path, model_path, config_path, report_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> synth_seed;
  std::optional<int> parallelism;
  synth->add_option("--trace", trace_path)->required();
  synth->add_option("--catalog", catalog_dir)->required();
  synth->add_option("--model", model_path)->required();
  synth->add_option("--config", config_path);
  synth->add_option("--out", out)->required();
  synth->add_option("--report", report_path)->required();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--parallelism", parallelism);
  synth->add_option("--set", overrides, "key=value config override");

  auto* gen_trace = app.add_subcommand("gen-trace", "generate a feasible synthetic trace with an answer key");
  int n = 50;
  double dup = 0, param_dup = 0;
  bool presence = false, no_hashes = false;
  std::string key_path;
  gen_trace->add_option("--catalog", catalog_dir)->required();
  gen_trace->add_option("--n", n)->check(CLI::NonNegativeNumber);
  gen_trace->add_option("--dup", dup)->check(CLI::Range(0.0, 1.0));
  gen_trace->add_option("--param-dup", param_dup)->check(CLI::Range(0.0, 1.0));
  gen_trace->add_flag("--presence", presence);
  gen_trace->add_flag("--no-hashes", no_hashes);
  gen_trace->add_option("--seed", seed);
  gen_trace->add_option("--out", out)->required();
  gen_trace->add_option("--key", key_path);

  auto* eval = app.add_subcommand("eval", "print percentile table of a report");
  eval->add_option("--report", report_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_data) {
      save_dataset(gen_synthetic_catalog({tables, rows, seed}), out);
    } else if (*profile) {
      auto ds = std::make_shared<Dataset>(load_dataset(catalog_dir));
      SimulatedBackend backend(ds);
      FitOptions opts;
      opts.skip_sparse_kinds = true;
      if (gbdt) opts.join_regressor = JoinRegressor::TreeEnsemble;
      save_model(fit(collect_profiles(ds->catalog, backend, queries, seed), opts), out);
    } else if (*synth) {
      PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (synth_seed) config.search.seed = *synth_seed;
      if (parallelism) config.parallelism = *parallelism;
      config.validate();
      auto ds = std::make_shared<const Dataset>(load_dataset(catalog_dir));
      auto backend = make_backend(config, ds);
      const auto model = load_model(model_path);
      const auto result = synthesize_workload(load_trace(trace_path), ds->catalog, *backend, model, config);
      write_file(out, result.workload);
      write_file(report_path, serialize_report(result.report));
    } else if (*gen_trace) {
      auto ds = std::make_shared<Dataset>(load_dataset(catalog_dir));
      SimulatedBackend backend(ds);
      SyntheticTraceSpec spec;
      spec.n = n;
      spec.seed = seed;
      spec.dup = dup;
      spec.param_dup = param_dup;
      spec.presence_mode = presence;
      spec.with_hashes = !no_hashes;
      const auto trace = gen_synthetic_trace(ds->catalog, backend, spec);
      write_file(out, serialize_trace(trace.records));
      if (!key_path.empty()) write_file(key_path, serialize_answer_key(trace.answer_key));
    } else if (*eval) {
      std::cout << format_summary(summarize(parse_report(read_file(report_path))));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
