#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using oncf::cli::RunConfig;

struct Common {
  std::string config_file;
};

// `--config FILE` plus free-form `--key=value` overrides on every subcommand.
CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Common& common) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", common.config_file, "run configuration file (key = value)");
  sub->allow_extras();
  sub->footer("Configuration keys (override with --key=value):\n" + oncf::cli::describe_keys());
  return sub;
}

RunConfig config_of(const Common& common, CLI::App* sub, const std::vector<std::pair<std::string, std::string>>& extra) {
  std::vector<std::string> overrides = sub->remaining();
  for (const auto& [key, value] : extra) {
    if (!value.empty()) overrides.push_back("--" + key + "=" + value);
  }
  std::optional<std::filesystem::path> file;
  if (!common.config_file.empty()) file = common.config_file;
  return oncf::cli::load_config(file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oncf: ConvNCF collaborative filtering"};
  app.require_subcommand(1);
  Common common;

  std::string input, output;
  auto* ingest = add_command(app, "ingest", "filter, split and write the split manifest", common);
  ingest->add_option("--input", input, "interaction file (same as --data=...)");
  ingest->add_option("--output", output, "output directory (same as --out=...)");

  auto* pretrain = add_command(app, "pretrain", "train the shallow counterpart and save its tables", common);
  auto* train = add_command(app, "train", "train a model, write model.ckpt and metrics.csv", common);

  std::string per_user;
  auto* eval = add_command(app, "eval", "evaluate a checkpoint on validation and test", common);
  eval->add_option("--per-user", per_user, "write user<TAB>rank of every test user to this file");

  auto* gradcheck = add_command(app, "gradcheck", "finite-difference check of the analytic gradients", common);
  auto* paramcount = add_command(app, "paramcount", "count head and embedding parameters", common);

  std::string user;
  std::size_t k = 10;
  auto* recommend = add_command(app, "recommend", "top-k unseen items for one user", common);
  recommend->add_option("--user", user, "raw user id")->required();
  recommend->add_option("--k", k, "number of items")->capture_default_str();

  oncf::SyntheticSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a planted low-rank synthetic interaction file");
  synth->add_option("--output", synth_out, "interaction file to write")->required();
  synth->add_option("--users", synth_spec.users)->capture_default_str();
  synth->add_option("--items", synth_spec.items)->capture_default_str();
  synth->add_option("--rank", synth_spec.rank)->capture_default_str();
  synth->add_option("--min-interactions", synth_spec.min_interactions)->capture_default_str();
  synth->add_option("--max-interactions", synth_spec.max_interactions)->capture_default_str();
  synth->add_option("--signal", synth_spec.signal)->capture_default_str();
  synth->add_option("--popularity", synth_spec.popularity)->capture_default_str();
  synth->add_option("--seed", synth_spec.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return oncf::cli::cmd_ingest(config_of(common, ingest, {{"data", input}, {"out", output}}), std::cout);
    if (*pretrain) return oncf::cli::cmd_pretrain(config_of(common, pretrain, {}), std::cout);
    if (*train) return oncf::cli::cmd_train(config_of(common, train, {}), std::cout);
    if (*eval) {
      std::optional<std::filesystem::path> tsv;
      if (!per_user.empty()) tsv = per_user;
      return oncf::cli::cmd_eval(config_of(common, eval, {}), tsv, std::cout);
    }
    if (*gradcheck) return oncf::cli::cmd_gradcheck(config_of(common, gradcheck, {}), std::cout);
    if (*paramcount) return oncf::cli::cmd_paramcount(config_of(common, paramcount, {}), std::cout);
    if (*recommend) return oncf::cli::cmd_recommend(config_of(common, recommend, {}), user, k, std::cout);
    if (*synth) return oncf::cli::cmd_synth(synth_spec, synth_out, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
