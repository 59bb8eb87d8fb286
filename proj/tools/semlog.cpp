// semlog: generate labeled process logs, run detectors, score them.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "semlog/commands.hpp"

namespace {

using namespace semlog;
using namespace semlog::cli;

void add_playout_flags(CLI::App* cmd, PlayoutConfig& cfg) {
  cmd->add_option("--max-loop", cfg.max_loop_iterations, "Maximum executions of a loop body")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-traces", cfg.max_traces, "Cap on traces enumerated per model")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semlog: semantic anomaly datasets for business process logs"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::size_t holdout = 0, d2_models = 0;
  auto* generate = app.add_subcommand("generate", "Play out models, simulate anomalies, write train/d1/d2 JSONL");
  generate->add_option("--models", gen.models_dir, "Directory of process models")->required();
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Root random seed")->required();
  auto* holdout_opt = generate->add_option("--holdout", holdout, "Models held out for D1 (default: 1/5 of corpus, at least 1)");
  auto* d2_opt = generate->add_option("--d2-models", d2_models, "Training models re-sampled for D2")
                     ->check(CLI::PositiveNumber);
  generate->add_option("--jobs", gen.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  add_playout_flags(generate, gen.playout);

  DetectOptions det;
  std::string backend = "oracle";
  std::string models_dir, train_normals;
  std::size_t timeout_ms = 60000;
  auto* detect = app.add_subcommand("detect", "Classify traces with a detector backend");
  detect->add_option("--dataset", det.dataset, "Dataset or variants JSONL")->required();
  detect->add_option("--backend", backend, "oracle | pairs | llm")
      ->check(CLI::IsMember({"oracle", "pairs", "llm"}))
      ->capture_default_str();
  detect->add_option("--out", det.out, "Predictions file")->capture_default_str();
  detect->add_option("--models", models_dir, "Models directory (oracle backend)");
  detect->add_option("--train-normals", train_normals, "JSONL with normal training traces (pairs backend)");
  detect->add_option("--endpoint", det.endpoint.base_url, "Chat-completions base URL (llm backend)");
  detect->add_option("--model-name", det.endpoint.model_name, "Model name sent to the endpoint");
  detect->add_option("--temperature", det.endpoint.temperature)->check(CLI::NonNegativeNumber)->capture_default_str();
  detect->add_option("--max-concurrent", det.endpoint.max_concurrent)->check(CLI::PositiveNumber)->capture_default_str();
  detect->add_option("--timeout-ms", timeout_ms)->check(CLI::PositiveNumber)->capture_default_str();
  add_playout_flags(detect, det.playout);

  std::string predictions, gold, report = "report.json";
  auto* eval = app.add_subcommand("eval", "Score predictions against gold labels and causes");
  eval->add_option("--predictions", predictions)->required();
  eval->add_option("--gold", gold)->required();
  eval->add_option("--out", report, "Report JSON path")->capture_default_str();

  std::string csv, variants_out = "variants.jsonl";
  EventLogColumns cols;
  auto* variants = app.add_subcommand("variants", "Extract trace variants from a CSV event log");
  variants->add_option("--csv", csv)->required();
  variants->add_option("--out", variants_out)->capture_default_str();
  variants->add_option("--case-col", cols.case_col)->capture_default_str();
  variants->add_option("--activity-col", cols.activity_col)->capture_default_str();
  auto* time_opt = variants->add_option("--time-col", cols.time_col)->capture_default_str();

  std::string validate_dir;
  PlayoutConfig validate_cfg;
  auto* validate = app.add_subcommand("validate-models", "Parse models and report their size and language");
  validate->add_option("--models", validate_dir)->required();
  add_playout_flags(validate, validate_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*generate) {
      if (*holdout_opt) gen.holdout = holdout;
      if (*d2_opt) gen.d2_models = d2_models;
      cmd_generate(gen);
      return kOk;
    }
    if (*detect) {
      det.backend = backend == "oracle" ? Backend::Oracle : backend == "pairs" ? Backend::Pairs : Backend::Llm;
      if (!models_dir.empty()) det.models_dir = models_dir;
      if (!train_normals.empty()) det.train_normals = train_normals;
      det.endpoint.timeout = std::chrono::milliseconds(timeout_ms);
      det.endpoint.api_key = EndpointConfig::api_key_from_env();
      const auto sum = cmd_detect(det);
      std::cout << "n_unparseable " << sum.n_unparseable << '\n';
      return sum.transport_failure ? kTransportError : kOk;
    }
    if (*eval) {
      cmd_eval(predictions, gold, report);
      return kOk;
    }
    if (*variants) {
      cols.require_time = time_opt->count() > 0;
      cmd_variants(csv, variants_out, cols);
      return kOk;
    }
    if (*validate) return cmd_validate_models(validate_dir, validate_cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return kTransportError;
  } catch (const EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << '\n';
    return kTransportError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
