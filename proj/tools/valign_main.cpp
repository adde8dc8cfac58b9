// valign CLI: build-codebook, extract, evaluate, validate, report.
// Links the C API only.

#include <CLI11.hpp>
#include <valign/valign.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

struct ConfigCloser {
  void operator()(va_config* cfg) const { va_config_close(cfg); }
};
using ConfigHandle = std::unique_ptr<va_config, ConfigCloser>;

int fail(va_status status, const char* what) {
  std::fprintf(stderr, "valign: %s failed: %s\n", what, va_last_error());
  return static_cast<int>(status);
}

ConfigHandle open_config(const std::string& path, const std::vector<std::string>& sets,
                         int& err) {
  va_config* raw = nullptr;
  va_status st = path.empty() ? va_config_parse("{}", &raw) : va_config_open(path.c_str(), &raw);
  if (st != VA_OK) {
    err = fail(st, "loading config");
    return nullptr;
  }
  ConfigHandle cfg(raw);
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "valign: --set expects key=value, got '%s'\n", kv.c_str());
      err = 2;
      return nullptr;
    }
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (va_status s = va_config_set(cfg.get(), key.c_str(), value.c_str()); s != VA_OK) {
      err = fail(s, "applying override");
      return nullptr;
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"valign - measures how closely one corpus aligns with another in value space"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "Run-config JSON file");
  app.add_option("--set", sets, "Override a config key, e.g. --set optimizer.T=5")
      ->take_all();

  auto* build = app.add_subcommand("build-codebook", "Construct and optimize the value codebook");

  std::string extract_out = "expressions.jsonl";
  auto* extract = app.add_subcommand("extract", "Extract value expressions for every corpus");
  extract->add_option("--out", extract_out, "Output JSONL path");

  std::string codebook_path;
  std::string eval_out = "evaluation.jsonl";
  auto* evaluate = app.add_subcommand("evaluate", "Score examinees against reference corpora");
  evaluate->add_option("--codebook", codebook_path, "Codebook checkpoint path")->required();
  evaluate->add_option("--out", eval_out, "Output report JSONL path");

  std::string cube_path;
  std::string validate_out = "validity.jsonl";
  auto* validate = app.add_subcommand("validate", "Run the validity/reliability suite");
  validate->add_option("--cube", cube_path, "Score cube JSONL path")->required();
  validate->add_option("--out", validate_out, "Output report JSONL path");

  std::string report_path;
  auto* report = app.add_subcommand("report", "Render a JSONL report as an aligned table");
  report->add_option("--in", report_path, "Report JSONL path")->required();

  CLI11_PARSE(app, argc, argv);

  if (report->parsed()) {
    char* text = nullptr;
    if (va_status st = va_render_report(report_path.c_str(), &text); st != VA_OK)
      return fail(st, "rendering report");
    std::fputs(text, stdout);
    va_string_free(text);
    return 0;
  }

  int err = 0;
  ConfigHandle cfg = open_config(config_path, sets, err);
  if (!cfg) return err;

  if (build->parsed()) {
    char checkpoint[4096];
    if (va_status st = va_run_build_codebook(cfg.get(), checkpoint, sizeof(checkpoint));
        st != VA_OK)
      return fail(st, "build-codebook");
    std::printf("%s\n", checkpoint);
    return 0;
  }
  if (extract->parsed()) {
    if (va_status st = va_run_extract(cfg.get(), extract_out.c_str()); st != VA_OK)
      return fail(st, "extract");
    std::printf("%s\n", extract_out.c_str());
    return 0;
  }
  if (evaluate->parsed()) {
    if (va_status st = va_run_evaluate(cfg.get(), codebook_path.c_str(), eval_out.c_str());
        st != VA_OK)
      return fail(st, "evaluate");
    std::printf("%s\n", eval_out.c_str());
    return 0;
  }
  if (validate->parsed()) {
    if (va_status st = va_run_validate(cfg.get(), cube_path.c_str(), validate_out.c_str());
        st != VA_OK)
      return fail(st, "validate");
    std::printf("%s\n", validate_out.c_str());
    return 0;
  }
  return 0;
}
