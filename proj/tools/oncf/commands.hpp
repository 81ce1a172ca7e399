#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "oncf/synthetic.hpp"
#include "run_config.hpp"

namespace oncf::cli {

// Each command writes its artifacts under config.out, reports on `out` and
// returns the process exit code. Errors propagate as exceptions.

int cmd_ingest(const RunConfig& config, std::ostream& out);
int cmd_pretrain(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, const std::optional<std::filesystem::path>& per_user, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);
int cmd_paramcount(const RunConfig& config, std::ostream& out);
int cmd_recommend(const RunConfig& config, const std::string& user, std::size_t k, std::ostream& out);
int cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& output, std::ostream& out);

}  // namespace oncf::cli
