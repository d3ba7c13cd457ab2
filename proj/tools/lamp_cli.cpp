#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lamp/contrastive.hpp"
#include "lamp/error.hpp"
#include "lamp/eval.hpp"
#include "lamp/hin.hpp"
#include "lamp/metapath.hpp"

namespace fs = std::filesystem;
using namespace lamp;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

TrainConfig resolve_config(const Globals& g, int epochs = -1) {
  TrainConfig c = g.config.empty() ? TrainConfig{} : load_config(g.config);
  if (g.seed_set) c.seed = g.seed;
  if (epochs >= 0) c.epochs = epochs;
  c.validate();
  std::cerr << "config-hash: " << c.hash() << "\n";
  return c;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string target_key(const Hin& hin, int local) {
  return hin.node_key[hin.type_offset(hin.target_type) + static_cast<std::size_t>(local)];
}

std::string embeddings_csv(const Hin& hin, const Matrix& z) {
  std::ostringstream out;
  out << "node_id";
  for (std::size_t c = 0; c < z.cols; ++c) out << ",z_" << c;
  out << "\n";
  for (std::size_t r = 0; r < z.rows; ++r) {
    out << target_key(hin, static_cast<int>(r));
    for (double v : z.row(r)) out << "," << fmt(v);
    out << "\n";
  }
  return out.str();
}

// Rows follow the target order of `hin`; every target must be present.
Matrix read_embeddings(const fs::path& path, const Hin& hin) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read embeddings " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("embeddings file is empty");
  const std::size_t n = hin.type_count(hin.target_type);
  const std::size_t off = hin.type_offset(hin.target_type);
  std::vector<std::vector<double>> rows(n);
  std::size_t dim = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string key, cell;
    std::getline(ss, key, ',');
    auto id = hin.node_id(key);
    if (!id || static_cast<std::size_t>(*id) < off || static_cast<std::size_t>(*id) >= off + n)
      throw DataError("embeddings line " + std::to_string(lineno) + ": '" + key + "' is not a target node");
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError("embeddings line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (dim == 0) dim = v.size();
    if (v.size() != dim || dim == 0) throw DataError("embeddings line " + std::to_string(lineno) + ": ragged row");
    rows[*id - off] = std::move(v);
  }
  Matrix z(n, dim);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].empty()) throw DataError("embeddings lack target node '" + target_key(hin, static_cast<int>(r)) + "'");
    std::copy(rows[r].begin(), rows[r].end(), z.row(r).begin());
  }
  return z;
}

int cmd_validate(const std::string& data) {
  Hin hin = load_hin(data);
  ValidationReport rep = validate(hin);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w.code << ": " << w.message << "\n";
  for (const auto& e : rep.errors) std::cerr << "error: " << e.code << ": " << e.message << "\n";
  std::cout << "nodes\t" << hin.num_nodes() << "\nedges\t" << hin.edges.size() << "\ntypes\t" << hin.num_types()
            << "\nrelations\t" << hin.num_relations() << "\ntarget\t" << hin.node_types[hin.target_type] << "\n";
  return rep.ok() ? kOk : kData;
}

int cmd_materialize(const std::string& data, const std::string& spec, const std::string& out) {
  Hin hin = load_hin(data);
  auto mps = parse_metapath_list(hin, spec);
  if (!out.empty()) fs::create_directories(out);
  std::cout << "metapath\tedges\tsaturated\n";
  for (const auto& mp : mps) {
    auto sg = materialize(hin, mp);
    std::cout << mp.name << "\t" << sg.edges.size() << "\t" << (sg.saturated ? "yes" : "no") << "\n";
    if (out.empty()) continue;
    std::ostringstream t;
    t << "u\tv\tcount\n";
    for (std::size_t e = 0; e < sg.edges.size(); ++e)
      t << target_key(hin, sg.edges[e].first) << "\t" << target_key(hin, sg.edges[e].second) << "\t" << sg.counts[e]
        << "\n";
    write_file(fs::path(out) / (mp.name + ".tsv"), t.str());
  }
  return kOk;
}

std::string integrated_tsv(const Hin& hin, const IntegratedSubGraph& ig) {
  std::ostringstream t;
  t << "u\tv";
  for (const auto& n : ig.metapaths) t << "\t" << n;
  t << "\n";
  for (std::size_t e = 0; e < ig.edges.size(); ++e) {
    t << target_key(hin, ig.edges[e].first) << "\t" << target_key(hin, ig.edges[e].second);
    for (std::size_t i = 0; i < ig.num_metapaths(); ++i) t << "\t" << int(ig.encoding(e, i));
    t << "\n";
  }
  return t.str();
}

int cmd_integrate(const std::string& data, const std::string& spec, const std::string& out) {
  Hin hin = load_hin(data);
  std::vector<MetaPathSubGraph> sgs;
  for (const auto& mp : parse_metapath_list(hin, spec)) sgs.push_back(materialize(hin, mp));
  const std::string text = integrated_tsv(hin, integrate(sgs));
  if (out.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(out);
    write_file(fs::path(out) / "integrated.tsv", text);
  }
  return kOk;
}

int cmd_analyze(const std::string& data, const std::string& spec, const std::string& out) {
  Hin hin = load_hin(data);
  auto mps = parse_metapath_list(hin, spec);
  std::vector<MetaPathSubGraph> sgs;
  for (const auto& mp : mps) sgs.push_back(materialize(hin, mp));
  const auto labels = hin.target_labels();
  bool labeled = false;
  for (int l : labels) labeled = labeled || l >= 0;
  std::ostringstream t;
  t << "metric\ta\tb\tvalue\n";
  for (const auto& sg : sgs) {
    t << "edges\t" << sg.metapath.name << "\t-\t" << sg.edges.size() << "\n";
    if (labeled && !hin.multi_label)
      t << "homophily\t" << sg.metapath.name << "\t-\t" << short_fmt(homophily_ratio(sg, labels)) << "\n";
  }
  for (std::size_t i = 0; i < sgs.size(); ++i)
    for (std::size_t j = 0; j < sgs.size(); ++j) {
      if (i == j) continue;
      if (i < j)
        t << "jaccard\t" << sgs[i].metapath.name << "\t" << sgs[j].metapath.name << "\t"
          << short_fmt(jaccard_similarity(sgs[i], sgs[j])) << "\n";
      if (!sgs[j].edges.empty())
        t << "coverage\t" << sgs[i].metapath.name << "\t" << sgs[j].metapath.name << "\t"
          << short_fmt(coverage_ratio(sgs[i], sgs[j])) << "\n";
    }
  if (out.empty())
    std::cout << t.str();
  else
    write_file(out, t.str());
  return kOk;
}

int cmd_train(const Globals& g, const std::string& data, const std::string& spec, const std::string& out,
              int epochs, const std::string& dump_augmented) {
  TrainConfig cfg = resolve_config(g, epochs);
  Hin hin = load_hin(data);
  auto mps = parse_metapath_list(hin, spec);
  fs::create_directories(out);
  Trainer tr(hin, mps, cfg);
  TrainResult res = tr.train();
  const fs::path dir(out);

  std::ostringstream log;
  for (const auto& e : res.log) log << epoch_log_json(e) << "\n";
  write_file(dir / "log.jsonl", log.str());
  ad::save_checkpoint(tr.params(), dir / "checkpoint.bin", dir / "checkpoint.json");
  write_file(dir / "embeddings.csv", embeddings_csv(hin, res.embeddings));
  write_file(dir / "config.txt", cfg.to_text());

  nlohmann::json m;
  m["config_hash"] = cfg.hash();
  m["seed"] = cfg.seed;
  m["metapaths"] = nlohmann::json::array();
  for (const auto& mp : mps) m["metapaths"].push_back(mp.name);
  m["rows"] = res.embeddings.rows;
  m["dim"] = res.embeddings.cols;
  m["view"] = "metapath";
  m["epochs_run"] = res.epochs_run;
  m["best_epoch"] = res.best_epoch;
  m["stop_reason"] = res.stop_reason;
  m["final_retention"] = res.final_retention;
  write_file(dir / "embeddings.json", m.dump(2) + "\n");

  if (!dump_augmented.empty()) {
    ForwardPass fp = tr.forward(tr.inference_draw());
    const auto& ig = tr.integrated();
    std::ostringstream t;
    t << "u\tv\te_uv\tomega\tp\n";
    for (std::size_t k = 0; k < fp.aug.kept.size(); ++k) {
      const auto e = static_cast<std::size_t>(fp.aug.kept[k]);
      const auto [u, v] = ig.edges[e];
      t << target_key(hin, u) << "\t" << target_key(hin, v) << "\t";
      for (std::size_t i = 0; i < ig.num_metapaths(); ++i) t << int(ig.encoding(e, i));
      t << "\t" << fmt(fp.aug.logits.value()(k, 0)) << "\t" << fmt(fp.aug.p.value()(k, 0)) << "\n";
    }
    write_file(dump_augmented, t.str());
  }
  std::cerr << "trained " << res.epochs_run << " epochs (" << res.stop_reason << "), best epoch " << res.best_epoch
            << "\n";
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& task, const std::string& emb, const std::string& data,
             const std::string& out, int runs) {
  Hin hin = load_hin(data);
  Matrix z = read_embeddings(emb, hin);
  const ProbeTargets targets = probe_targets(hin);
  nlohmann::json j;
  j["task"] = task;
  j["seed"] = g.seed;
  if (task == "classify") {
    Split sp = stratified_split(targets.strata(), mix_seed(g.seed, "split"));
    ProbeResult r = linear_probe(z, targets, sp);
    j["micro_f1"] = r.test.micro;
    j["macro_f1"] = r.test.macro;
    j["val_micro_f1"] = r.val.micro;
    j["train"] = sp.train.size();
    j["val"] = sp.val.size();
    j["test"] = sp.test.size();
  } else {
    if (hin.multi_label) throw DataError("cluster evaluation needs a single-label dataset");
    ClusterScores s = cluster_metrics(z, targets.labels, targets.num_classes, mix_seed(g.seed, "kmeans"), runs);
    j["nmi"] = s.nmi;
    j["ari"] = s.ari;
    j["runs"] = runs;
  }
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(out);
    write_file(fs::path(out) / (task + ".json"), text);
  }
  return kOk;
}

int cmd_sensitivity(const Globals& g, const std::string& data, const std::string& spec, const std::string& out,
                    int runs, int min_size, const std::string& variant, int epochs) {
  TrainConfig cfg = resolve_config(g, epochs);
  Hin hin = load_hin(data);
  auto mps = parse_metapath_list(hin, spec);
  SensitivityOptions so;
  so.runs = runs;
  so.min_size = static_cast<std::size_t>(min_size);
  so.variant = variant == "lamp" ? SensitivityVariant::lamp : SensitivityVariant::no_integration;
  so.progress = [](const std::string& s) { std::cerr << "combination " << s << "\n"; };
  SensitivityReport rep = sensitivity_study(hin, mps, cfg, so);
  fs::path jp(out);
  if (jp.has_parent_path()) fs::create_directories(jp.parent_path());
  write_file(jp, rep.to_json() + "\n");
  fs::path tp = jp;
  tp.replace_extension(".tsv");
  write_file(tp, rep.to_tsv());
  std::cout << rep.to_tsv();
  if (rep.failed > 0) {
    std::cerr << "error: " << rep.failed << " combination(s) failed\n";
    return kData;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lamp: meta-path sub-graph integration and adversarial contrastive embedding for HINs"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Training config file (key = value lines)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", g.seed, "Root random seed")->capture_default_str();

  std::string data, spec, out, emb, variant = "lamp";
  int epochs = -1, runs = 1, min_size = 2, cluster_runs = 10;
  std::string dump_augmented;

  auto* v = app.add_subcommand("validate", "Parse and validate a HIN document");
  v->add_option("--data", data, "HIN JSON document")->required();

  auto* m = app.add_subcommand("materialize", "Materialize meta-path sub-graphs");
  m->add_option("--data", data, "HIN JSON document")->required();
  m->add_option("--metapaths", spec, "Meta-paths: PAP,PSP or NAME=REL,~REL;NAME=...")->required();
  m->add_option("--out", out, "Directory for one edge TSV per meta-path");

  auto* in = app.add_subcommand("integrate", "Integrated sub-graph with meta-path membership bits");
  in->add_option("--data", data, "HIN JSON document")->required();
  in->add_option("--metapaths", spec, "Meta-paths")->required();
  in->add_option("--out", out, "Output directory (stdout when omitted)");

  auto* an = app.add_subcommand("analyze", "Edge counts, homophily, Jaccard and coverage as TSV");
  an->add_option("--data", data, "HIN JSON document")->required();
  an->add_option("--metapaths", spec, "Meta-paths")->required();
  an->add_option("--out", out, "Output TSV file (stdout when omitted)");

  auto* tr = app.add_subcommand("train", "Train and write checkpoint, embeddings and log");
  tr->add_option("--data", data, "HIN JSON document")->required();
  tr->add_option("--metapaths", spec, "Meta-paths")->required();
  tr->add_option("--out", out, "Output directory")->required();
  tr->add_option("--epochs", epochs, "Override the configured epoch limit");
  tr->add_option("--dump-augmented", dump_augmented, "Write the inference-time augmented edges (u, v, e_uv, omega, p) as TSV");

  auto* ev = app.add_subcommand("eval", "Evaluate embeddings");
  ev->require_subcommand(1);
  auto* ec = ev->add_subcommand("classify", "Linear probe, Micro/Macro-F1 on a 24/6/70 split");
  auto* ek = ev->add_subcommand("cluster", "k-means NMI and ARI");
  for (auto* s : {ec, ek}) {
    s->add_option("--embeddings", emb, "Embeddings CSV")->required();
    s->add_option("--data", data, "HIN JSON document with labels")->required();
    s->add_option("--out", out, "Directory for <task>.json (stdout when omitted)");
  }
  ek->add_option("--runs", cluster_runs, "k-means runs")->capture_default_str();

  auto* se = app.add_subcommand("sensitivity", "Train on every meta-path combination and rank them");
  se->add_option("--data", data, "HIN JSON document")->required();
  se->add_option("--metapaths", spec, "Meta-paths (at least two)")->required();
  se->add_option("--out", out, "Report JSON path; the TSV ranking is written next to it")->required();
  se->add_option("--runs", runs, "Runs per combination")->capture_default_str();
  se->add_option("--min-size", min_size, "Smallest combination size")->capture_default_str();
  se->add_option("--variant", variant, "lamp or no_integration")
      ->check(CLI::IsMember({"lamp", "no_integration"}))
      ->capture_default_str();
  se->add_option("--epochs", epochs, "Override the configured epoch limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsage;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (!tr->parsed() && !se->parsed()) resolve_config(g);
    if (v->parsed()) return cmd_validate(data);
    if (m->parsed()) return cmd_materialize(data, spec, out);
    if (in->parsed()) return cmd_integrate(data, spec, out);
    if (an->parsed()) return cmd_analyze(data, spec, out);
    if (tr->parsed()) return cmd_train(g, data, spec, out, epochs, dump_augmented);
    if (ec->parsed()) return cmd_eval(g, "classify", emb, data, out, cluster_runs);
    if (ek->parsed()) return cmd_eval(g, "cluster", emb, data, out, cluster_runs);
    if (se->parsed()) return cmd_sensitivity(g, data, spec, out, runs, min_size, variant, epochs);
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
