#include "fuotasim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "fuotasim/fec.hpp"
#include "fuotasim/simulation.hpp"

namespace fuotasim::cli {

namespace {

const std::vector<std::string> kAxisOrder{"devices", "class", "dr", "p", "firmware_size", "redundancy"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::string canonical_axis(const std::string& name) {
  if (name == "ping_periodicity") return "p";
  if (name == "size" || name == "firmware") return "firmware_size";
  if (name == "multicast_class") return "class";
  return name;
}

}  // namespace

SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("axis '" + text + "' must look like name=values");
  SweepAxis axis{canonical_axis(trim(text.substr(0, eq))), {}};
  if (std::find(kAxisOrder.begin(), kAxisOrder.end(), axis.name) == kAxisOrder.end()) {
    throw ConfigError("unknown sweep axis '" + axis.name + "' (devices, class, dr, p, firmware_size, redundancy)");
  }
  std::istringstream in(text.substr(eq + 1));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      axis.values.push_back(item);
      continue;
    }
    // Ranges step by one unless a ":step" suffix is given.
    std::string hi_text = item.substr(dots + 2);
    long step = 1;
    if (const auto colon = hi_text.find(':'); colon != std::string::npos) {
      step = std::stol(hi_text.substr(colon + 1));
      hi_text = hi_text.substr(0, colon);
    }
    long lo = 0, hi = 0;
    try {
      lo = std::stol(item.substr(0, dots));
      hi = std::stol(hi_text);
    } catch (const std::exception&) {
      throw ConfigError("axis range '" + item + "' is not an integer range");
    }
    if (step < 1 || hi < lo) throw ConfigError("axis range '" + item + "' is empty");
    for (long v = lo; v <= hi; v += step) axis.values.push_back(std::to_string(v));
  }
  if (axis.values.empty()) throw ConfigError("axis '" + axis.name + "' lists no values");
  return axis;
}

void apply_axis_value(ScenarioConfig& config, const std::string& name, const std::string& value) {
  const std::string axis = canonical_axis(name);
  const auto as_int = [&](const std::string& v) {
    try {
      std::size_t used = 0;
      const int x = std::stoi(v, &used);
      if (used != v.size()) throw ConfigError("");
      return x;
    } catch (const std::exception&) {
      throw ConfigError("axis " + axis + ": '" + v + "' is not an integer");
    }
  };
  if (axis == "devices") {
    config.devices = as_int(value);
  } else if (axis == "class") {
    config.multicast_class = parse_class(value);
  } else if (axis == "dr") {
    config.multicast_dr = as_int(value);
  } else if (axis == "p") {
    config.ping_periodicity = as_int(value);
  } else if (axis == "firmware_size") {
    config.firmware_size = parse_size(value);
  } else if (axis == "redundancy") {
    config.redundancy = static_cast<std::size_t>(as_int(value));
  } else {
    throw ConfigError("unknown sweep axis '" + name + "'");
  }
}

std::vector<ScenarioConfig> expand_sweep(const ScenarioConfig& base, std::vector<SweepAxis> axes) {
  for (auto& a : axes) a.name = canonical_axis(a.name);
  std::stable_sort(axes.begin(), axes.end(), [](const SweepAxis& a, const SweepAxis& b) {
    return std::find(kAxisOrder.begin(), kAxisOrder.end(), a.name) <
           std::find(kAxisOrder.begin(), kAxisOrder.end(), b.name);
  });
  for (std::size_t i = 1; i < axes.size(); ++i) {
    if (axes[i].name == axes[i - 1].name) throw ConfigError("axis '" + axes[i].name + "' given twice");
  }
  std::vector<ScenarioConfig> points{base};
  for (const auto& axis : axes) {
    std::vector<ScenarioConfig> next;
    for (const auto& p : points) {
      for (const auto& v : axis.values) {
        ScenarioConfig c = p;
        apply_axis_value(c, axis.name, v);
        next.push_back(std::move(c));
      }
    }
    points = std::move(next);
  }
  for (const auto& p : points) p.validate();
  return points;
}

std::vector<PointResult> run_points(const std::vector<ScenarioConfig>& points, int jobs, bool transcript) {
  std::vector<PointResult> results(points.size());
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t i = 0; i < points.size(); ++i) {
    results[i].config = points[i];
    results[i].runs.resize(points[i].seeds.size());
    for (std::size_t s = 0; s < points[i].seeds.size(); ++s) tasks.emplace_back(i, s);
  }
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const auto [i, s] = tasks[k];
      try {
        auto outcome = sim::run_fuota(points[i], points[i].seeds[s], transcript);
        results[i].runs[s] = {std::move(outcome.initial), std::move(outcome.multicast), std::move(outcome.transcript)};
      } catch (const std::exception& e) {
        errors[k] = "seed " + std::to_string(points[i].seeds[s]) + ": " + e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    auto& r = results[tasks[k].first];
    if (!errors[k].empty()) r.error += (r.error.empty() ? "" : "; ") + errors[k];
  }
  for (auto& r : results) {
    if (!r.error.empty()) continue;
    std::vector<metrics::PhaseReport> initial, multicast;
    for (const auto& run : r.runs) {
      initial.push_back(run.initial);
      multicast.push_back(run.multicast);
    }
    r.initial = metrics::aggregate(initial, r.config.seeds);
    r.multicast = metrics::aggregate(multicast, r.config.seeds);
  }
  return results;
}

std::string results_csv(const std::vector<PointResult>& results) {
  std::string out = "devices,class,dr,p,firmware_size,redundancy,phase,metric,mean,std,n_seeds\n";
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    const auto& c = r.config;
    const std::string key = std::to_string(c.devices) + "," + to_string(c.multicast_class) + "," +
                            std::to_string(c.multicast_dr) + "," + std::to_string(c.ping_periodicity) + "," +
                            std::to_string(c.firmware_size) + "," + std::to_string(c.redundancy) + ",";
    for (const auto* agg : {&r.initial, &r.multicast}) {
      const char* phase = agg == &r.initial ? "initial" : "multicast";
      for (const auto& [name, stat] : agg->metrics) {
        out += key + phase + "," + name + "," + num(stat.mean) + "," + num(stat.std) + "," +
               std::to_string(agg->n_seeds()) + "\n";
      }
    }
  }
  return out;
}

std::string results_dat(const std::vector<PointResult>& results) {
  std::string out;
  bool header = false;
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    if (!header) {
      out += "# devices class dr p firmware_size redundancy";
      for (const auto* agg : {&r.initial, &r.multicast}) {
        const char* phase = agg == &r.initial ? "init_" : "mc_";
        for (const auto& m : agg->metrics) out += std::string(" ") + phase + m.first + " " + phase + m.first + "_std";
      }
      out += "\n";
      header = true;
    }
    const auto& c = r.config;
    out += std::to_string(c.devices) + " " + to_string(c.multicast_class) + " " + std::to_string(c.multicast_dr) + " " +
           std::to_string(c.ping_periodicity) + " " + std::to_string(c.firmware_size) + " " +
           std::to_string(c.redundancy);
    for (const auto* agg : {&r.initial, &r.multicast}) {
      for (const auto& m : agg->metrics) out += " " + num(m.second.mean) + " " + num(m.second.std);
    }
    out += "\n";
  }
  return out;
}

std::vector<FecStudyPoint> fec_study(std::size_t nb_frag, std::size_t redundancy, const std::vector<double>& losses,
                                     std::size_t trials, std::uint64_t seed) {
  std::vector<FecStudyPoint> out;
  // Codec behaviour does not depend on payload bytes, so one-byte fragments suffice.
  std::vector<fec::Fragment> coded;
  {
    std::vector<fec::Fragment> originals;
    for (std::size_t i = 0; i < nb_frag; ++i) {
      originals.push_back({static_cast<std::uint32_t>(i + 1), {static_cast<std::uint8_t>(i)}});
    }
    coded = originals;
    auto parity = fec::encode_redundancy(originals, redundancy);
    coded.insert(coded.end(), parity.begin(), parity.end());
  }
  for (std::size_t li = 0; li < losses.size(); ++li) {
    Rng rng = make_stream(seed, 1000 + li);
    FecStudyPoint p{losses[li], trials, 0};
    for (std::size_t t = 0; t < trials; ++t) {
      fec::Decoder dec(nb_frag, 1);
      for (const auto& f : coded) {
        if (uniform(rng, 0.0, 1.0) < losses[li]) continue;
        if (dec.ingest(f) == fec::DecodeStatus::Complete) break;
      }
      if (dec.complete()) ++p.successes;
    }
    out.push_back(p);
  }
  return out;
}

std::string fec_study_csv(std::size_t nb_frag, std::size_t redundancy, const std::vector<FecStudyPoint>& points) {
  std::string out = "nb_frag,redundancy,loss,trials,successes,success_rate\n";
  for (const auto& p : points) {
    out += std::to_string(nb_frag) + "," + std::to_string(redundancy) + "," + num(p.loss) + "," +
           std::to_string(p.trials) + "," + std::to_string(p.successes) + "," + num(p.success_rate()) + "\n";
  }
  return out;
}

}  // namespace fuotasim::cli
