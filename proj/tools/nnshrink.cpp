// Copyright 2026 The nnshrink Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "nnshrink/json_io.hpp"
#include "nnshrink/pipeline.hpp"
#include "nnshrink/rng.hpp"
#include "nnshrink/slice.hpp"
#include "nnshrink/verify.hpp"

namespace {

using nnshrink::Box;
using nnshrink::InputError;
using nnshrink::Network;

int log_level() {
  // NNSHRINK_LOG: quiet | warn | info | debug (default warn).
  const char* env = std::getenv("NNSHRINK_LOG");
  if (env == nullptr) return 1;
  const std::string v = env;
  if (v == "quiet") return 0;
  if (v == "warn") return 1;
  if (v == "info") return 2;
  if (v == "debug") return 3;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[nnshrink] " << msg << "\n";
}

Network load_network(const std::string& path) {
  Network net = nnshrink::network_from_json(nnshrink::load_json_file(path));
  const auto violations = nnshrink::validate(net);
  if (!violations.empty()) {
    throw InputError(path + ": invalid network: " + violations.front().message +
                     " at " + nnshrink::to_string(violations.front().where));
  }
  return net;
}

Box load_box(const std::string& path) {
  return nnshrink::box_from_json(nnshrink::load_json_file(path));
}

std::vector<double> parse_vector(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InputError("cannot parse number \"" + item + "\"");
    }
  }
  if (out.empty()) throw InputError("empty input vector");
  return out;
}

double parse_tolerance(const std::string& s) {
  if (s == "inf" || s == "+inf")
    return std::numeric_limits<double>::infinity();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw InputError("cannot parse number \"" + s + "\"");
  }
}

void print_vector(const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i)
    std::cout << (i ? " " : "") << v[i];
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nnshrink: certified shrinking and slicing of piecewise-linear "
               "feed-forward networks"};
  app.require_subcommand(1);

  // Common option storage.
  std::string net_path, box_path, out_path, report_path, family_dir, query_path;
  std::string mode_str = "exact", splits_str, input_csv, in_path;
  std::string eps_str = "0", delta_str = "0";
  std::int64_t budget = 10000, sim_samples = 100000, sample_count = -1;
  int bound_budget = 64;
  std::uint64_t seed = 0;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;

  auto add_pipeline_flags = [&](CLI::App* cmd) {
    cmd->add_option("--net", net_path, "network JSON")->required();
    cmd->add_option("--box", box_path, "input box JSON")->required();
    cmd->add_option("--mode", mode_str, "exact|respres|relaxed|full");
    cmd->add_option("--eps", eps_str, "relaxed-mode output error budget e_t");
    cmd->add_option("--delta", delta_str, "result-preserving margin");
    cmd->add_option("--budget", budget, "verifier node budget per query");
    cmd->add_option("--bound-budget", bound_budget, "bound-tightening leaves");
    cmd->add_option("--sim-samples", sim_samples, "simulation sample count");
    cmd->add_option("--seed", seed, "simulation seed");
    cmd->add_option("--threads", threads, "worker threads");
  };

  CLI::App* cmd_simplify = app.add_subcommand(
      "simplify", "simplify one network over one input box");
  add_pipeline_flags(cmd_simplify);
  cmd_simplify->add_option("--out", out_path, "simplified network JSON path")
      ->required();
  cmd_simplify->add_option("--report", report_path,
                           "report JSON path (default: <out>.report.json)");

  CLI::App* cmd_slice = app.add_subcommand(
      "slice", "slice the input domain and simplify each sub-domain");
  add_pipeline_flags(cmd_slice);
  cmd_slice->add_option("--splits", splits_str, "per-dimension splits, e.g. 2,2")
      ->required();
  cmd_slice->add_option("--sample", sample_count,
                        "simplify only this many randomly chosen sub-domains");
  cmd_slice->add_option("--out", family_dir, "family output directory")
      ->required();

  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a network or family");
  cmd_eval->add_option("--net", net_path, "network JSON");
  cmd_eval->add_option("--family", family_dir, "family directory");
  cmd_eval->add_option("--input", input_csv, "input vector, comma separated")
      ->required();

  CLI::App* cmd_verify = app.add_subcommand("verify", "solve a query JSON");
  cmd_verify->add_option("--query", query_path, "query JSON")->required();
  cmd_verify->add_option("--budget", budget, "node budget");

  CLI::App* cmd_bounds = app.add_subcommand("bounds", "certified neuron bounds");
  cmd_bounds->add_option("--net", net_path, "network JSON")->required();
  cmd_bounds->add_option("--box", box_path, "input box JSON")->required();
  cmd_bounds->add_option("--budget", bound_budget, "tightening leaves");
  cmd_bounds->add_option("--out", out_path, "bounds JSON path (default stdout)");

  CLI::App* cmd_report = app.add_subcommand("report", "summarize a report JSON");
  cmd_report->add_option("--in", in_path, "report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_simplify || *cmd_slice) {
      nnshrink::PipelineConfig config;
      config.mode = nnshrink::mode_from_string(mode_str);
      config.error_budget = parse_tolerance(eps_str);
      config.delta = parse_tolerance(delta_str);
      config.verify_budget = budget;
      config.bound_budget = bound_budget;
      config.sim_samples = sim_samples;
      config.seed = seed;
      const Network net = load_network(net_path);
      const Box box = load_box(box_path);

      if (*cmd_simplify) {
        log_info("simplifying " + net_path);
        auto [simplified, report] = nnshrink::simplify(net, box, config);
        nnshrink::write_json_file(out_path,
                                  nnshrink::network_to_json(simplified));
        if (report_path.empty()) report_path = out_path + ".report.json";
        nnshrink::write_json_file(report_path,
                                  nnshrink::report_to_json(report));
        std::cout << "neurons " << report.neurons_before << " -> "
                  << report.neurons_after << ", removed "
                  << report.removed_total << ", unknown " << report.unknown
                  << ", error bound " << report.error_headline << "\n";
        return 0;
      }

      nnshrink::SlicePlan plan;
      std::stringstream ss(splits_str);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          plan.splits.push_back(std::stoi(item));
        } catch (const std::exception&) {
          throw InputError("bad --splits value \"" + item + "\"");
        }
      }
      std::vector<std::int64_t> sample;
      const bool sampled = sample_count >= 0;
      if (sampled) {
        // Deterministic choice of distinct entry indices.
        const std::int64_t total = plan.total();
        nnshrink::Rng rng(seed ^ 0x51a5eULL);
        std::vector<std::int64_t> all(total);
        for (std::int64_t i = 0; i < total; ++i) all[i] = i;
        for (std::int64_t i = total - 1; i > 0; --i)
          std::swap(all[i], all[rng.next_u64() % (i + 1)]);
        all.resize(std::min<std::int64_t>(sample_count, total));
        sample = std::move(all);
      }
      log_info("slicing " + net_path + " into " + std::to_string(plan.total()) +
               " sub-domains");
      nnshrink::NetworkFamily family = nnshrink::slice_and_simplify(
          net, box, plan, config, sampled ? &sample : nullptr, threads);
      nnshrink::save_family(family, family_dir);
      const auto lin = nnshrink::linearization_report(family);
      nnshrink::write_json_file(family_dir + "/linearization.json",
                                nnshrink::linearization_to_json(lin));
      std::cout << "entries " << family.entries.size() << ", fully linear "
                << lin.fully_linear_count << ", mean removed fraction "
                << lin.mean_removed_fraction << "\n";
      return 0;
    }

    if (*cmd_eval) {
      const std::vector<double> x = parse_vector(input_csv);
      if (!net_path.empty() == !family_dir.empty())
        throw InputError("eval: pass exactly one of --net / --family");
      if (!net_path.empty()) {
        print_vector(nnshrink::evaluate(load_network(net_path), x).outputs());
      } else {
        const nnshrink::NetworkFamily family = nnshrink::load_family(family_dir);
        print_vector(nnshrink::family_evaluate(family, x));
      }
      return 0;
    }

    if (*cmd_verify) {
      const nlohmann::json doc = nnshrink::load_json_file(query_path);
      Network net = doc.at("net").is_string()
                        ? load_network(doc.at("net").get<std::string>())
                        : nnshrink::network_from_json(doc.at("net"));
      Box box = doc.at("box").is_string()
                    ? load_box(doc.at("box").get<std::string>())
                    : nnshrink::box_from_json(doc.at("box"));
      const nlohmann::json& goal = doc.at("goal");
      const std::string kind = goal.at("kind").get<std::string>();

      auto neuron_of = [&](const nlohmann::json& j) {
        return nnshrink::NeuronRef{j.at("layer").get<int>(),
                                   j.at("index").get<int>()};
      };
      auto line_of = [&](const nlohmann::json& j) {
        return std::pair<double, double>{j.at("slope").get<double>(),
                                         j.at("intercept").get<double>()};
      };

      std::vector<nnshrink::Query> queries;
      if (kind == "feasible") {
        nnshrink::FeasibilityGoal g;
        for (const auto& jc : goal.at("constraints")) {
          nnshrink::LinearConstraint c;
          for (const auto& jt : jc.at("terms"))
            c.terms.push_back({neuron_of(jt), jt.at("coeff").get<double>()});
          const std::string op = jc.at("op").get<std::string>();
          if (op == "<") c.cmp = nnshrink::Cmp::kLt;
          else if (op == "<=") c.cmp = nnshrink::Cmp::kLe;
          else if (op == ">") c.cmp = nnshrink::Cmp::kGt;
          else if (op == ">=") c.cmp = nnshrink::Cmp::kGe;
          else throw InputError("unknown comparison \"" + op + "\"");
          c.rhs = jc.at("rhs").get<double>();
          g.constraints.push_back(std::move(c));
        }
        queries.push_back({std::move(net), std::move(box), std::move(g)});
      } else if (kind == "phase") {
        queries = nnshrink::build_phase_query(
            net, neuron_of(goal.at("neuron")), goal.at("segment").get<int>(),
            box);
      } else if (kind == "layer_mismatch") {
        const auto [a, b] = line_of(goal.at("line"));
        queries.push_back(nnshrink::build_forward_query(
            net, neuron_of(goal.at("neuron")), a, b, goal.at("k").get<int>(),
            box, goal.value("tau", nnshrink::kMismatchTau)));
      } else if (kind == "argmax_mismatch") {
        const auto [a, b] = line_of(goal.at("line"));
        queries.push_back(nnshrink::build_result_preserving_query(
            net, neuron_of(goal.at("neuron")), a, b, goal.value("delta", 0.0),
            box));
      } else {
        throw InputError("unknown goal kind \"" + kind + "\"");
      }

      nnshrink::Verdict worst;
      worst.status = nnshrink::Verdict::Status::kUnsat;
      std::int64_t nodes = 0;
      for (const auto& q : queries) {
        const nnshrink::Verdict v = nnshrink::solve(q, budget);
        nodes += v.nodes;
        if (v.status == nnshrink::Verdict::Status::kSat) {
          worst = v;
          break;
        }
        if (v.status == nnshrink::Verdict::Status::kUnknown) worst = v;
      }
      worst.nodes = nodes;

      nlohmann::json verdict{{"nodes", worst.nodes}};
      int code = 0;
      if (worst.status == nnshrink::Verdict::Status::kSat) {
        verdict["status"] = "sat";
        verdict["witness"] = worst.witness;
        code = 1;
      } else if (worst.status == nnshrink::Verdict::Status::kUnsat) {
        verdict["status"] = "unsat";
      } else {
        verdict["status"] = "unknown";
        verdict["frontier"] = worst.frontier;
        code = 4;
      }
      std::cout << verdict.dump(2) << "\n";
      return code;
    }

    if (*cmd_bounds) {
      const Network net = load_network(net_path);
      const Box box = load_box(box_path);
      const nlohmann::json out =
          nnshrink::bounds_to_json(nnshrink::tighten(net, box, bound_budget));
      if (out_path.empty())
        std::cout << out.dump(2) << "\n";
      else
        nnshrink::write_json_file(out_path, out);
      return 0;
    }

    if (*cmd_report) {
      const nlohmann::json doc = nnshrink::load_json_file(in_path);
      if (doc.contains("counts")) {
        const auto& size = doc.at("size");
        const auto& counts = doc.at("counts");
        std::cout << "mode: " << doc.value("mode", "?") << "\n"
                  << "neurons: " << size.at("neurons_before") << " -> "
                  << size.at("neurons_after") << "\n"
                  << "hidden:  " << size.at("hidden_before") << " -> "
                  << size.at("hidden_after") << "\n";
        for (const auto& [key, value] : counts.items())
          std::cout << "  " << key << ": " << value << "\n";
        std::cout << "error headline: "
                  << doc.at("output_error").at("headline") << "\n";
      } else if (doc.contains("entries")) {
        std::cout << "entries: " << doc.at("entries").size() << "\n"
                  << "fully linear: " << doc.at("fully_linear_count") << "\n"
                  << "mean removed fraction: "
                  << doc.at("mean_removed_fraction") << "\n";
      } else {
        throw InputError(in_path + ": not a recognized report document");
      }
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nnshrink::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed document: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
