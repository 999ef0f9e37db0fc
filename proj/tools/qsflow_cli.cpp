// Command-line front end; talks to the library only through the C API.
#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "qsflow/qsflow.h"

namespace {

constexpr int kExitUsage = 2;

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream outf(path, std::ios::binary | std::ios::trunc);
  if (!outf) return false;
  outf << text;
  return static_cast<bool>(outf);
}

struct Invocation {
  std::string config;
  std::string out;
  std::string manifest;
  std::string format;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

int execute(const std::string& command, const Invocation& inv, bool has_seed) {
  std::string config_text;
  if (!read_file(inv.config, config_text)) {
    std::cerr << "qsflow: cannot read config " << inv.config << "\n";
    return kExitUsage;
  }
  qsf_run_options opts{};
  opts.format = inv.format.empty() ? nullptr : inv.format.c_str();
  opts.has_seed = has_seed ? 1 : 0;
  opts.seed = inv.seed;
  opts.threads = inv.threads;

  qsf_result* result = nullptr;
  const qsf_status st = qsf_command_run(command.c_str(), config_text.c_str(), &opts, &result);
  if (st != QSF_OK) {
    std::cerr << "qsflow: " << qsf_status_string(st) << ": " << qsf_last_error() << "\n";
    return kExitUsage;
  }
  for (size_t i = 0; i < qsf_result_diagnostic_count(result); ++i) {
    std::cerr << "qsflow: " << qsf_result_diagnostic(result, i) << "\n";
  }
  const int code = qsf_result_exit_code(result);
  const std::string document = qsf_result_document(result);
  const std::string format = qsf_result_format(result);
  const std::string manifest = qsf_result_manifest(result);
  qsf_result_free(result);

  if (document.empty()) return code;
  if (inv.out.empty()) {
    std::cout << document;
  } else if (!write_file(inv.out, document)) {
    std::cerr << "qsflow: cannot write " << inv.out << "\n";
    return kExitUsage;
  }
  std::string manifest_path = inv.manifest;
  if (manifest_path.empty() && format == "csv" && !inv.out.empty()) {
    manifest_path = inv.out + ".manifest.json";
  }
  if (!manifest_path.empty() && !write_file(manifest_path, manifest)) {
    std::cerr << "qsflow: cannot write " << manifest_path << "\n";
    return kExitUsage;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsflow: quantum stochastic CP flow laboratory"};
  app.set_version_flag("--version", std::string(qsf_version()));
  app.require_subcommand(1);

  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec specs[] = {
      {"verify-algebra", "Property suite for the Ito algebra and Weyl operators"},
      {"weyl-check", "Weyl semigroup law for one quadruple and two coherent vectors"},
      {"germ", "Germ matrix, CCP test, dissipativity class and gauge fixing"},
      {"dilate", "Choi/Kraus dilation round trip and unitarity conditions"},
      {"simulate", "Monte Carlo ensemble of the filtering equation"},
      {"semigroup", "Lindblad semigroup at sample times"},
      {"genfun", "Generating-function kernel positivity and monotonicity"},
      {"crosscheck", "Oracle agreement between flows, Picard series and trajectories"},
  };

  Invocation inv;
  for (const Spec& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", inv.config, "JSON config file")->required();
    sub->add_option("--out", inv.out, "Output file (default: stdout)");
    sub->add_option("--manifest", inv.manifest,
                    "Manifest file (default for CSV output: <out>.manifest.json)");
    sub->add_option("--format", inv.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--seed", inv.seed, "Override the config seed");
    sub->add_option("--threads", inv.threads, "Worker threads (0: all cores)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    const bool has_seed = sub->count("--seed") > 0;
    return execute(sub->get_name(), inv, has_seed);
  }
  return kExitUsage;
}
