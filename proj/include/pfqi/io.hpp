#pragma once

#include <filesystem>
#include <string>

#include "pfqi/mdp.hpp"
#include "pfqi/regress.hpp"

namespace pfqi::io {

// Doubles in CSV output carry 17 significant digits, enough to round-trip
// IEEE-754 binary64 exactly.
std::string format_double(double v);

// Datasets serialize as one CSV
// (traj_id,t,s0..s{d-1},action,reward,ns0..ns{d-1},terminal) plus a JSON
// manifest sidecar.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

void save_model(const std::filesystem::path& file, const FittedQ& q);
std::unique_ptr<FittedQ> load_model(const std::filesystem::path& file);

void write_text(const std::filesystem::path& file, const std::string& content);
std::string read_text(const std::filesystem::path& file);

}  // namespace pfqi::io
