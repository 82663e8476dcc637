// Command-line entry point: run, sweep, fec sweep, validate.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fuotasim/config.hpp"
#include "fuotasim/sweep.hpp"

namespace fs = std::filesystem;
using namespace fuotasim;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::optional<int> devices;
  std::string clazz;
  std::optional<int> dr;
  std::optional<int> ping_periodicity;
  std::string firmware_size;
  std::string out;
  int jobs = 1;
  bool transcript = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "Scenario file (key = value with [sections])");
  app->add_option("--seed", f.seed, "Single seed");
  app->add_option("--seeds", f.seeds, "Seed list, e.g. 1,2,3 or 1..10");
  app->add_option("--devices", f.devices, "Number of devices");
  app->add_option("--class", f.clazz, "Multicast class")->check(CLI::IsMember({"B", "C", "b", "c"}));
  app->add_option("--dr", f.dr, "Multicast data rate")->check(CLI::Range(0, 5));
  app->add_option("--ping-periodicity", f.ping_periodicity, "Class B ping periodicity")->check(CLI::Range(0, 7));
  app->add_option("--firmware-size", f.firmware_size, "Image size in bytes, 'k' suffix for KiB");
  app->add_option("--out", f.out, "Output directory (default $FUOTASIM_OUT or ./results)");
  app->add_option("--jobs", f.jobs, "Parallel simulations")->check(CLI::PositiveNumber);
  app->add_flag("--transcript", f.transcript, "Write the event transcript of every run");
}

cli::ScenarioConfig build_config(const CommonFlags& f) {
  cli::ScenarioConfig c = f.config_path.empty() ? cli::ScenarioConfig{} : cli::load_config_file(f.config_path);
  if (f.seed && !f.seeds.empty()) throw ConfigError("use either --seed or --seeds, not both");
  if (f.seed) c.seeds = {*f.seed};
  if (!f.seeds.empty()) c.seeds = cli::parse_seed_list(f.seeds);
  if (f.devices) c.devices = *f.devices;
  if (!f.clazz.empty()) c.multicast_class = cli::parse_class(f.clazz);
  if (f.dr) c.multicast_dr = *f.dr;
  if (f.ping_periodicity) c.ping_periodicity = *f.ping_periodicity;
  if (!f.firmware_size.empty()) c.firmware_size = cli::parse_size(f.firmware_size);
  c.validate();
  return c;
}

fs::path output_dir(const CommonFlags& f) {
  if (!f.out.empty()) return f.out;
  if (const char* env = std::getenv("FUOTASIM_OUT"); env && *env) return env;
  return "results";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int execute(const cli::ScenarioConfig& base, const std::vector<cli::SweepAxis>& axes, const CommonFlags& flags) {
  const auto points = cli::expand_sweep(base, axes);
  const fs::path dir = output_dir(flags);
  fs::create_directories(dir);
  write_file(dir / "effective_config.ini", cli::write_config(base));

  const auto results = cli::run_points(points, flags.jobs, flags.transcript);
  write_file(dir / "results.csv", cli::results_csv(results));
  write_file(dir / "results.dat", cli::results_dat(results));

  int failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto& c = r.config;
    std::cout << "point " << i << ": devices=" << c.devices << " class=" << cli::to_string(c.multicast_class)
              << " dr=" << c.multicast_dr << " p=" << c.ping_periodicity << " size=" << c.firmware_size;
    if (!r.error.empty()) {
      ++failures;
      std::cout << "  ERROR " << r.error << "\n";
      continue;
    }
    std::cout << "  initial " << r.initial.at("total_time_min").mean << " min, " << r.initial.at("uplinks_per_device").mean
              << " uplinks/dev | update " << r.multicast.at("total_time_s").mean << " s, efficiency "
              << r.multicast.at("efficiency_pct").mean << "%, energy " << r.multicast.at("energy_j").mean << " J\n";
    if (flags.transcript) {
      const fs::path tdir = dir / "transcripts";
      fs::create_directories(tdir);
      for (std::size_t s = 0; s < r.runs.size(); ++s) {
        write_file(tdir / ("point" + std::to_string(i) + "_seed" + std::to_string(c.seeds[s]) + ".log"),
                   r.runs[s].transcript);
      }
    }
  }
  std::cout << "wrote " << (dir / "results.csv").string() << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator of LoRaWAN firmware updates over multicast"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags, validate_flags;
  auto* run = app.add_subcommand("run", "Simulate one scenario over its seeds");
  add_common(run, run_flags);

  auto* sweep = app.add_subcommand("sweep", "Simulate the Cartesian product of the given axes");
  add_common(sweep, sweep_flags);
  std::vector<std::string> axis_specs;
  sweep->add_option("--axis", axis_specs, "Axis such as dr=0..5, class=B,C, p=0..7, firmware_size=5k,10k")
      ->required();

  auto* validate = app.add_subcommand("validate", "Check a configuration and print its effective form");
  add_common(validate, validate_flags);

  auto* fec = app.add_subcommand("fec", "Codec-only studies");
  fec->require_subcommand(1);
  auto* fec_sweep = fec->add_subcommand("sweep", "Decoding success versus independent fragment loss");
  std::size_t nb_frag = 101, redundancy = 30, trials = 1000;
  std::uint64_t fec_seed = 1;
  std::string losses_text = "0,0.05,0.1,0.15,0.2,0.25,0.3";
  std::string fec_out;
  fec_sweep->add_option("--nb-frag", nb_frag, "Original fragments")->check(CLI::PositiveNumber);
  fec_sweep->add_option("--redundancy", redundancy, "Parity fragments");
  fec_sweep->add_option("--losses", losses_text, "Comma-separated loss probabilities");
  fec_sweep->add_option("--trials", trials, "Trials per loss rate")->check(CLI::PositiveNumber);
  fec_sweep->add_option("--seed", fec_seed, "Seed");
  fec_sweep->add_option("--out", fec_out, "Output directory (default $FUOTASIM_OUT or ./results)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return execute(build_config(run_flags), {}, run_flags);
    if (*sweep) {
      std::vector<cli::SweepAxis> axes;
      for (const auto& a : axis_specs) axes.push_back(cli::parse_axis(a));
      return execute(build_config(sweep_flags), axes, sweep_flags);
    }
    if (*validate) {
      const auto c = build_config(validate_flags);
      std::cout << cli::write_config(c) << "# fingerprint " << cli::fingerprint(c) << "\n";
      return 0;
    }
    if (*fec_sweep) {
      std::vector<double> losses;
      std::stringstream in(losses_text);
      for (std::string item; std::getline(in, item, ',');) losses.push_back(std::stod(item));
      const auto points = cli::fec_study(nb_frag, redundancy, losses, trials, fec_seed);
      CommonFlags f;
      f.out = fec_out;
      const fs::path dir = output_dir(f);
      fs::create_directories(dir);
      const std::string csv = cli::fec_study_csv(nb_frag, redundancy, points);
      write_file(dir / "fec_results.csv", csv);
      std::cout << csv;
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
