#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "privscore/core.hpp"
#include "privscore/evaluation.hpp"
#include "privscore/granularity.hpp"
#include "privscore/graph.hpp"
#include "privscore/io.hpp"
#include "privscore/irt.hpp"
#include "privscore/naive.hpp"
#include "privscore/synth.hpp"

namespace privscore::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kBundleFormat = 1;

/// Fit did not converge; results were still written.
class ConvergenceWarning : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dataset bundles
// ---------------------------------------------------------------------------

enum class DataKind { Granularity, Responses };

struct Dataset {
  DataKind kind = DataKind::Granularity;
  UserRegistry registry;
  ItemCatalog catalog;
  std::optional<GranularityMatrix> granularity;
  ResponseMatrix responses;
  std::optional<SocialGraph> graph;
};

struct ValidationReport {
  std::size_t duplicate_edges = 0;
  std::size_t self_loops = 0;
  std::vector<std::string> isolated_users;
  std::vector<std::string> unknown_users;
  std::vector<std::string> warnings;

  std::string to_text() const {
    std::string s;
    s += "duplicate_edges_dropped: " + std::to_string(duplicate_edges) + "\n";
    s += "self_loops_dropped: " + std::to_string(self_loops) + "\n";
    s += "isolated_users: " + std::to_string(isolated_users.size()) + "\n";
    for (const auto& u : isolated_users) s += "  " + u + "\n";
    s += "users_without_profile_rows: " + std::to_string(unknown_users.size()) + "\n";
    for (const auto& u : unknown_users) s += "  " + u + "\n";
    for (const auto& w : warnings) s += "warning: " + w + "\n";
    return s;
  }
};

inline std::string data_file_name(DataKind k) {
  return k == DataKind::Granularity ? "granularity.csv" : "responses.csv";
}

/// Canonical data file: every (user, item) cell, user-major in registry order.
inline std::string format_data(const Dataset& d) {
  std::string out = d.kind == DataKind::Granularity ? "user_id,item_id,bytes\n" : "user_id,item_id,shared\n";
  for (std::size_t j = 0; j < d.registry.size(); ++j)
    for (std::size_t i = 0; i < d.catalog.size(); ++i) {
      const auto v = d.kind == DataKind::Granularity ? (*d.granularity)(i, j)
                                                     : static_cast<std::int64_t>(d.responses(i, j));
      out += io::csv_escape(d.registry.id(j)) + "," + io::csv_escape(d.catalog.id(i)) + "," + std::to_string(v) + "\n";
    }
  return out;
}

inline std::string format_edges(const SocialGraph& g) {
  std::string out = "source,target\n";
  for (auto [u, v] : g.edges())
    out += io::csv_escape(g.registry().id(u)) + "," + io::csv_escape(g.registry().id(v)) + "\n";
  return out;
}

/// Writes the bundle files and its manifest; returns the manifest hash.
inline std::string write_bundle(const Dataset& d, const fs::path& dir, const ValidationReport& report,
                                json extra = json::object()) {
  fs::create_directories(dir);
  json files = json::object();
  const auto data = format_data(d);
  io::write_file(dir / data_file_name(d.kind), data);
  files[data_file_name(d.kind)] = io::hex64(io::fnv1a(data));
  if (d.graph) {
    const auto edges = format_edges(*d.graph);
    io::write_file(dir / "edges.csv", edges);
    files["edges.csv"] = io::hex64(io::fnv1a(edges));
  } else if (fs::exists(dir / "edges.csv")) {
    fs::remove(dir / "edges.csv");
  }
  json m = {{"format", "privscore-bundle"},
            {"format_version", kBundleFormat},
            {"tool_version", kVersion},
            {"kind", d.kind == DataKind::Granularity ? "granularity" : "responses"},
            {"items", d.catalog.size()},
            {"users", d.registry.size()},
            {"edges", d.graph ? json(d.graph->edge_count()) : json(nullptr)},
            {"files", files}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  const auto hash = io::hex64(io::fnv1a(m.dump()));
  m["manifest_hash"] = hash;
  io::write_file(dir / "manifest.json", m.dump(2) + "\n");
  io::write_file(dir / "validation.txt", "# manifest=" + hash + "\n" + report.to_text());
  return hash;
}

struct LoadedBundle {
  Dataset data;
  json manifest;
  std::string hash;
};

namespace detail {

struct CellTable {
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::map<std::pair<std::size_t, std::size_t>, std::int64_t> cells;  // (item, user) -> value
};

inline std::size_t intern(std::vector<std::string>& ids, std::map<std::string, std::size_t>& index,
                          const std::string& id) {
  auto [it, added] = index.emplace(id, ids.size());
  if (added) ids.push_back(id);
  return it->second;
}

/// Reads user/item/value rows, keeping first-appearance order of users and items.
template <typename ValueFn>
CellTable read_cells(const io::CsvTable& t, ValueFn&& value) {
  CellTable c;
  std::map<std::string, std::size_t> uidx, iidx;
  for (const auto& row : t.rows) {
    if (row.fields[0].empty()) throw io::ParseError(t.source, row.line, "empty user id");
    if (row.fields[1].empty()) throw io::ParseError(t.source, row.line, "empty item id");
    const auto j = intern(c.users, uidx, row.fields[0]);
    const auto i = intern(c.items, iidx, row.fields[1]);
    if (!c.cells.emplace(std::make_pair(i, j), value(row)).second)
      throw io::ParseError(t.source, row.line,
                           "duplicate entry for user '" + row.fields[0] + "' item '" + row.fields[1] + "'");
  }
  if (c.users.empty()) throw io::ParseError(t.source, 1, "no data rows");
  return c;
}

}  // namespace detail

struct IngestOptions {
  std::optional<fs::path> edges;
  std::optional<fs::path> granularity;
  std::optional<fs::path> responses;
  /// user_id,item_id,text rows; repeated (user, item) rows are list entries.
  std::optional<fs::path> profiles;
  fs::path out;
};

struct IngestResult {
  Dataset data;
  ValidationReport report;
  std::string manifest_hash;
};

/// Validates raw input files and assembles the in-memory dataset.
inline IngestResult assemble_dataset(const IngestOptions& opt) {
  const int sources = opt.granularity.has_value() + opt.responses.has_value() + opt.profiles.has_value();
  if (sources != 1) throw ValidationError("ingest needs exactly one of --granularity, --responses or --profiles");

  IngestResult res;
  auto& d = res.data;
  detail::CellTable cells;
  if (opt.granularity) {
    d.kind = DataKind::Granularity;
    auto t = io::read_csv(*opt.granularity);
    io::require_header(t, {"user_id", "item_id", "bytes"});
    cells = detail::read_cells(t, [&](const io::CsvRow& row) {
      const auto b = io::parse_int(t, row, 2);
      if (b < 0) throw io::ParseError(t.source, row.line, "negative byte count " + std::to_string(b));
      return b;
    });
  } else if (opt.responses) {
    d.kind = DataKind::Responses;
    auto t = io::read_csv(*opt.responses);
    io::require_header(t, {"user_id", "item_id", "shared"});
    cells = detail::read_cells(t, [&](const io::CsvRow& row) {
      const auto v = io::parse_int(t, row, 2);
      if (v != 0 && v != 1) throw io::ParseError(t.source, row.line, "shared must be 0 or 1");
      return v;
    });
  } else {
    d.kind = DataKind::Granularity;
    auto t = io::read_csv(*opt.profiles);
    io::require_header(t, {"user_id", "item_id", "text"});
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> entries;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& row : t.rows) {
      auto key = std::make_pair(row.fields[0], row.fields[1]);
      auto [it, added] = entries.try_emplace(key);
      if (added) order.push_back(key);
      it->second.push_back(row.fields[2]);
    }
    io::CsvTable measured{t.source, {"user_id", "item_id", "bytes"}, {}, {}};
    std::map<std::pair<std::string, std::string>, std::size_t> first_line;
    for (const auto& row : t.rows) first_line.try_emplace({row.fields[0], row.fields[1]}, row.line);
    for (const auto& key : order)
      measured.rows.push_back({first_line[key], {key.first, key.second, std::to_string(measure_bytes(entries[key]))}});
    cells = detail::read_cells(measured, [&](const io::CsvRow& row) { return io::parse_int(measured, row, 2); });
  }

  std::vector<std::string> users = cells.users;
  std::map<std::string, std::size_t> uidx;
  for (std::size_t j = 0; j < users.size(); ++j) uidx[users[j]] = j;
  std::vector<Edge> edges;
  if (opt.edges) {
    auto t = io::read_csv(*opt.edges);
    io::require_header(t, {"source", "target"});
    for (const auto& row : t.rows) {
      if (row.fields[0].empty() || row.fields[1].empty())
        throw io::ParseError(t.source, row.line, "empty user id in edge");
      for (int e = 0; e < 2; ++e) {
        const auto& id = row.fields[static_cast<std::size_t>(e)];
        if (!uidx.count(id)) {
          res.report.unknown_users.push_back(id);
          detail::intern(users, uidx, id);
        }
      }
      edges.emplace_back(uidx[row.fields[0]], uidx[row.fields[1]]);
    }
  }

  d.registry = UserRegistry(users);
  d.catalog = ItemCatalog(cells.items);
  const std::size_t n = d.catalog.size(), nu = d.registry.size();
  std::vector<std::int64_t> values(n * nu, 0);
  for (auto [key, v] : cells.cells) values[key.first * nu + key.second] = v;
  if (d.kind == DataKind::Granularity) {
    d.granularity = GranularityMatrix(d.catalog, d.registry, values);
    d.responses = build_response_matrix(*d.granularity);
  } else {
    std::vector<std::uint8_t> shared(values.begin(), values.end());
    d.responses = ResponseMatrix(d.catalog, d.registry, std::move(shared));
  }
  if (!res.report.unknown_users.empty())
    res.report.warnings.push_back(std::to_string(res.report.unknown_users.size()) +
                                  " user(s) appear only in the edge file; treated as sharing nothing");

  if (opt.edges) {
    GraphBuildReport gr;
    d.graph = SocialGraph(d.registry, edges, &gr);
    res.report.duplicate_edges = gr.duplicates_dropped;
    res.report.self_loops = gr.self_loops_dropped;
    if (gr.duplicates_dropped) res.report.warnings.push_back(std::to_string(gr.duplicates_dropped) + " duplicate edge(s) dropped");
    if (gr.self_loops_dropped) res.report.warnings.push_back(std::to_string(gr.self_loops_dropped) + " self-loop(s) dropped");
    for (std::size_t j = 0; j < nu; ++j)
      if (d.graph->degree(j) == 0) res.report.isolated_users.push_back(d.registry.id(j));
    if (!res.report.isolated_users.empty())
      res.report.warnings.push_back(std::to_string(res.report.isolated_users.size()) +
                                    " user(s) have no connections; added as isolated nodes");
  }
  return res;
}

inline IngestResult cmd_ingest(const IngestOptions& opt) {
  auto res = assemble_dataset(opt);
  json inputs = json::object();
  auto add = [&](const char* key, const std::optional<fs::path>& p) {
    if (p) inputs[key] = {{"name", p->filename().string()}, {"hash", io::hex64(io::fnv1a(io::read_file(*p)))}};
  };
  add("edges", opt.edges);
  add("granularity", opt.granularity);
  add("responses", opt.responses);
  add("profiles", opt.profiles);
  res.manifest_hash = write_bundle(res.data, opt.out, res.report, {{"inputs", inputs}});
  return res;
}

/// Loads a bundle and checks its files against the manifest hashes.
inline LoadedBundle load_bundle(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw ValidationError("not a bundle (no manifest.json): " + dir.string());
  LoadedBundle b;
  try {
    b.manifest = json::parse(io::read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw ValidationError("manifest.json: " + std::string(e.what()));
  }
  if (b.manifest.value("format", "") != "privscore-bundle") throw ValidationError("manifest.json: unknown format");
  b.hash = b.manifest.at("manifest_hash").get<std::string>();
  for (auto& [name, hash] : b.manifest.at("files").items()) {
    const auto content = io::read_file(dir / name);
    if (io::hex64(io::fnv1a(content)) != hash.get<std::string>())
      throw ValidationError(name + " does not match the bundle manifest (stale or edited bundle)");
  }
  const bool granular = b.manifest.at("kind").get<std::string>() == "granularity";
  IngestOptions opt;
  if (granular)
    opt.granularity = dir / "granularity.csv";
  else
    opt.responses = dir / "responses.csv";
  if (fs::exists(dir / "edges.csv") && b.manifest.at("files").contains("edges.csv")) opt.edges = dir / "edges.csv";
  b.data = assemble_dataset(opt).data;
  return b;
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

inline json to_json(const GenConfig& c) {
  json bytes = json::array();
  for (const auto& r : c.level_bytes) bytes.push_back({r.lo, r.hi});
  json j = {{"seed", c.seed},
            {"users", c.users},
            {"items", c.items},
            {"max_level", c.max_level},
            {"discrimination", {c.discrimination_min, c.discrimination_max}},
            {"thresholds", {c.threshold_min, c.threshold_max}},
            {"threshold_min_gap", c.threshold_min_gap},
            {"coupling", c.coupling},
            {"level_bytes", bytes}};
  if (c.graph_mode == GraphMode::PreferentialAttachment)
    j["graph"] = {{"mode", "preferential"}, {"edges_per_node", c.edges_per_node}};
  else
    j["graph"] = {{"mode", "ego"},
                  {"first_hop", c.first_hop},
                  {"second_hop_links", c.second_hop_links},
                  {"first_hop_density", c.first_hop_density}};
  if (!c.item_level_bytes.empty()) {
    json per = json::array();
    for (const auto& item : c.item_level_bytes) {
      json rs = json::array();
      for (const auto& r : item) rs.push_back({r.lo, r.hi});
      per.push_back(rs);
    }
    j["item_level_bytes"] = per;
  }
  return j;
}

/// Parses a generator config. `seed`, `users` and `items` are required;
/// unknown keys are rejected.
inline GenConfig gen_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  static const std::set<std::string> known = {"seed", "users", "items", "max_level", "graph", "discrimination",
                                              "thresholds", "threshold_min_gap", "coupling", "level_bytes",
                                              "item_level_bytes"};
  for (auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError("config: unknown field '" + k + "'");
  for (const char* req : {"seed", "users", "items"})
    if (!j.contains(req)) throw ValidationError(std::string("config: missing required field '") + req + "'");
  GenConfig c;
  auto field = [&](const json& obj, const char* key, auto& dst) {
    if (!obj.contains(key)) return;
    try {
      obj.at(key).get_to(dst);
    } catch (const json::exception&) {
      throw ValidationError(std::string("config: field '") + key + "' has the wrong type");
    }
  };
  auto pair = [&](const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    std::vector<double> v;
    field(j, key, v);
    if (v.size() != 2) throw ValidationError(std::string("config: field '") + key + "' must be [min, max]");
    lo = v[0];
    hi = v[1];
  };
  auto ranges = [&](const json& arr, const char* key) {
    std::vector<std::vector<std::int64_t>> raw;
    try {
      arr.get_to(raw);
    } catch (const json::exception&) {
      throw ValidationError(std::string("config: field '") + key + "' must be a list of [lo, hi]");
    }
    std::vector<ByteRange> out;
    for (const auto& r : raw) {
      if (r.size() != 2) throw ValidationError(std::string("config: field '") + key + "' must be a list of [lo, hi]");
      out.push_back({r[0], r[1]});
    }
    return out;
  };
  field(j, "seed", c.seed);
  field(j, "users", c.users);
  field(j, "items", c.items);
  field(j, "max_level", c.max_level);
  pair("discrimination", c.discrimination_min, c.discrimination_max);
  pair("thresholds", c.threshold_min, c.threshold_max);
  field(j, "threshold_min_gap", c.threshold_min_gap);
  field(j, "coupling", c.coupling);
  if (j.contains("level_bytes")) c.level_bytes = ranges(j.at("level_bytes"), "level_bytes");
  if (j.contains("item_level_bytes"))
    for (const auto& item : j.at("item_level_bytes")) c.item_level_bytes.push_back(ranges(item, "item_level_bytes"));
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    std::string mode = "preferential";
    field(g, "mode", mode);
    if (mode == "preferential")
      c.graph_mode = GraphMode::PreferentialAttachment;
    else if (mode == "ego")
      c.graph_mode = GraphMode::EgoSample;
    else
      throw ValidationError("config: graph.mode must be 'preferential' or 'ego'");
    field(g, "edges_per_node", c.edges_per_node);
    field(g, "first_hop", c.first_hop);
    field(g, "second_hop_links", c.second_hop_links);
    field(g, "first_hop_density", c.first_hop_density);
  }
  c.validate();
  return c;
}

inline json to_json(const GradedItemParams& p) {
  json items = json::array();
  for (std::size_t i = 0; i < p.items.size(); ++i) {
    const auto& it = p.items[i];
    json row = {{"item_id", p.catalog.id(i)},
                {"fitted", it.status == ItemFitStatus::Fitted},
                {"base_level", it.base_level},
                {"levels", it.levels},
                {"thresholds", it.thresholds}};
    row["discrimination"] = std::isfinite(it.discrimination) ? json(it.discrimination) : json(nullptr);
    items.push_back(row);
  }
  return {{"max_level", p.max_level}, {"items", items}};
}

inline GradedItemParams graded_params_from_json(const json& j) {
  GradedItemParams p;
  p.max_level = j.at("max_level").get<int>();
  std::vector<std::string> ids;
  for (const auto& row : j.at("items")) {
    ids.push_back(row.at("item_id").get<std::string>());
    GradedItem it;
    it.status = row.at("fitted").get<bool>() ? ItemFitStatus::Fitted : ItemFitStatus::Constant;
    it.base_level = row.at("base_level").get<int>();
    it.levels = row.at("levels").get<std::vector<int>>();
    it.thresholds = row.at("thresholds").get<std::vector<double>>();
    it.discrimination = row.at("discrimination").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                             : row.at("discrimination").get<double>();
    p.items.push_back(std::move(it));
  }
  p.catalog = ItemCatalog(ids);
  return p;
}

inline json to_json(const ItemParams& p) {
  json items = json::array();
  for (std::size_t i = 0; i < p.items(); ++i) {
    json row = {{"item_id", p.catalog.id(i)}, {"fitted", p.fitted(i)}};
    row["discrimination"] = p.fitted(i) ? json(p.discrimination[i]) : json(nullptr);
    row["sensitivity"] = p.fitted(i) ? json(p.sensitivity[i]) : json(nullptr);
    if (!p.fitted(i)) row["constant_response"] = p.constant_response[i];
    items.push_back(row);
  }
  return {{"items", items}};
}

inline ItemParams item_params_from_json(const json& j) {
  ItemParams p;
  std::vector<std::string> ids;
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : j.at("items")) {
    ids.push_back(row.at("item_id").get<std::string>());
    const bool fitted = row.at("fitted").get<bool>();
    p.status.push_back(fitted ? ItemFitStatus::Fitted : ItemFitStatus::Constant);
    p.discrimination.push_back(fitted ? row.at("discrimination").get<double>() : nan);
    p.sensitivity.push_back(fitted ? row.at("sensitivity").get<double>() : nan);
    p.constant_response.push_back(fitted ? -1 : row.at("constant_response").get<int>());
  }
  p.catalog = ItemCatalog(ids);
  return p;
}

struct GenerateResult {
  SyntheticDataset dataset;
  std::string manifest_hash;
};

/// Generates a synthetic bundle plus a `truth.json` sidecar holding the
/// true attitudes, item parameters and sampled levels.
inline GenerateResult cmd_generate(const GenConfig& cfg, const fs::path& out) {
  cfg.validate();
  GenerateResult res;
  res.dataset = generate_dataset(cfg);
  const auto& ds = res.dataset;
  Dataset d;
  d.kind = DataKind::Granularity;
  d.registry = ds.graph.registry();
  d.catalog = ds.granularity.bytes.catalog();
  d.granularity = ds.granularity.bytes;
  d.responses = build_response_matrix(ds.granularity.bytes);
  d.graph = ds.graph;
  ValidationReport report;
  for (std::size_t j = 0; j < d.registry.size(); ++j)
    if (ds.graph.degree(j) == 0) report.isolated_users.push_back(d.registry.id(j));
  const json cfg_json = to_json(cfg);
  res.manifest_hash = write_bundle(d, out, report,
                                   {{"generator", cfg_json}, {"seed", cfg.seed},
                                    {"config_hash", io::hex64(io::fnv1a(cfg_json.dump()))}});

  json theta = json::object();
  json levels = json::object();
  for (std::size_t j = 0; j < d.registry.size(); ++j) {
    theta[d.registry.id(j)] = ds.theta[j];
    std::vector<int> lv(d.catalog.size());
    for (std::size_t i = 0; i < d.catalog.size(); ++i) lv[i] = ds.granularity.levels(i, j);
    levels[d.registry.id(j)] = lv;
  }
  json truth = {{"sidecar", "privscore-truth"},
                {"sidecar_version", 1},
                {"manifest_hash", res.manifest_hash},
                {"item_order", d.catalog.ids()},
                {"items", to_json(ds.granularity.truth)},
                {"theta", theta},
                {"levels", levels}};
  io::write_file(out / "truth.json", truth.dump(1) + "\n");
  return res;
}

inline GenerateResult cmd_generate(const fs::path& config_path, const fs::path& out) {
  json j;
  try {
    j = json::parse(io::read_file(config_path));
  } catch (const json::parse_error& e) {
    throw ValidationError(config_path.filename().string() + ": " + e.what());
  }
  return cmd_generate(gen_config_from_json(j), out);
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct ScoreOptions {
  fs::path bundle;
  /// Defaults to <bundle>/scores.
  std::optional<fs::path> out;
  std::vector<std::string> models = {"psn", "psi", "psgn", "psgi", "psc", "psna"};
  double damping = 0.85;
  int levels = 3;
  std::string intrinsic = "psi";
  bool literal_visibility = false;
  std::optional<std::string> centrality;
  bool normalized_betweenness = false;
  FitConfig fit;
};

inline std::string model_file_stem(ScoreModel m) {
  std::string s(to_string(m));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline ScoreModel model_from_stem(const std::string& stem) {
  for (auto m : {ScoreModel::PSN, ScoreModel::PSI, ScoreModel::PSGN, ScoreModel::PSGI, ScoreModel::PSC_PRC,
                 ScoreModel::PSC_EVC, ScoreModel::PSC_CC, ScoreModel::PSC_BC, ScoreModel::PSNA})
    if (model_file_stem(m) == stem) return m;
  throw ValidationError("unknown model '" + stem + "'");
}

/// Expands the --models list into concrete models in canonical order.
inline std::vector<ScoreModel> resolve_models(const std::vector<std::string>& names,
                                              const std::optional<std::string>& centrality) {
  std::set<ScoreModel> chosen;
  auto add_psc = [&](Centrality c) {
    switch (c) {
      case Centrality::PageRank: chosen.insert(ScoreModel::PSC_PRC); break;
      case Centrality::Eigenvector: chosen.insert(ScoreModel::PSC_EVC); break;
      case Centrality::Closeness: chosen.insert(ScoreModel::PSC_CC); break;
      case Centrality::Betweenness: chosen.insert(ScoreModel::PSC_BC); break;
    }
  };
  for (auto name : names) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == "psn") chosen.insert(ScoreModel::PSN);
    else if (name == "psi") chosen.insert(ScoreModel::PSI);
    else if (name == "psgn") chosen.insert(ScoreModel::PSGN);
    else if (name == "psgi") chosen.insert(ScoreModel::PSGI);
    else if (name == "psna") chosen.insert(ScoreModel::PSNA);
    else if (name == "psc") {
      if (centrality)
        add_psc(parse_centrality(*centrality));
      else
        for (auto c : {Centrality::PageRank, Centrality::Eigenvector, Centrality::Closeness, Centrality::Betweenness})
          add_psc(c);
    } else if (name.rfind("psc:", 0) == 0)
      add_psc(parse_centrality(name.substr(4)));
    else
      throw ValidationError("unknown model '" + name + "'");
  }
  return {chosen.begin(), chosen.end()};
}

struct ScoreRun {
  std::map<ScoreModel, ScoreVector> scores;
  std::optional<FitResult<ItemParams>> fit_2pl;
  std::optional<FitResult<GradedItemParams>> fit_grm;
  std::optional<LevelBuild> levels;
  bool converged = true;
  std::vector<std::string> warnings;
  std::string manifest_hash;
};

inline json fit_diagnostics(const auto& fit, const Dataset& d, const char* model) {
  json theta = json::object();
  for (std::size_t j = 0; j < fit.abilities.size(); ++j) theta[d.registry.id(j)] = fit.abilities.theta[j];
  json excluded = json::array();
  for (const auto& e : fit.excluded)
    excluded.push_back({{"item_id", d.catalog.id(e.item)}, {"constant_level", e.constant_level}});
  return {{"model", model},
          {"estimation", "MML-EM, Gauss-Hermite quadrature, EAP attitudes"},
          {"log_likelihood", fit.log_likelihood},
          {"log_likelihood_trace", fit.log_likelihood_trace},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"excluded_items", excluded},
          {"params", to_json(fit.params)},
          {"theta", theta}};
}

inline AbilityVector abilities_from_json(const json& j, const UserRegistry& registry) {
  AbilityVector a;
  a.registry = registry;
  a.theta.resize(registry.size());
  const auto& t = j.at("theta");
  for (std::size_t u = 0; u < registry.size(); ++u) a.theta[u] = t.at(registry.id(u)).get<double>();
  return a;
}

inline json fit_config_json(const FitConfig& f) {
  return {{"quadrature_nodes", f.quadrature_nodes},
          {"tolerance", f.tolerance},
          {"max_iterations", f.max_iterations},
          {"discrimination_bounds", {f.min_discrimination, f.max_discrimination}},
          {"seed", f.seed}};
}

/// Computes the requested models over a bundle and writes one score file
/// per model plus fit diagnostics. Throws ConvergenceWarning after writing
/// if any iterative solver stopped early.
inline ScoreRun cmd_score(const ScoreOptions& opt) {
  const auto bundle = load_bundle(opt.bundle);
  const auto& d = bundle.data;
  const fs::path out = opt.out.value_or(opt.bundle / "scores");
  const auto models = resolve_models(opt.models, opt.centrality);
  if (!(opt.damping >= 0.0 && opt.damping < 1.0)) throw ValidationError("--damping must lie in [0, 1)");
  if (opt.levels < 1) throw ValidationError("--levels must be >= 1");

  auto needs = [&](ScoreModel m) { return std::find(models.begin(), models.end(), m) != models.end(); };
  std::optional<ScoreModel> intrinsic;
  if (needs(ScoreModel::PSNA)) {
    intrinsic = model_from_stem(opt.intrinsic);
    if (!(intrinsic == ScoreModel::PSN || intrinsic == ScoreModel::PSI || intrinsic == ScoreModel::PSGN ||
          intrinsic == ScoreModel::PSGI))
      throw ValidationError("--intrinsic must be one of psn, psi, psgn, psgi");
  }
  auto wanted = [&](ScoreModel m) { return needs(m) || intrinsic == m; };
  const bool graph_models = needs(ScoreModel::PSNA) || needs(ScoreModel::PSC_PRC) || needs(ScoreModel::PSC_EVC) ||
                            needs(ScoreModel::PSC_CC) || needs(ScoreModel::PSC_BC);
  if (graph_models && !d.graph) throw ValidationError("network models need a bundle with an edge file");
  if ((wanted(ScoreModel::PSGN) || wanted(ScoreModel::PSGI)) && d.kind != DataKind::Granularity)
    throw ValidationError("granularity models need a bundle with byte counts (responses-only bundle given)");

  ScoreRun run;
  run.manifest_hash = bundle.hash;
  std::map<ScoreModel, std::string> extra;
  if (wanted(ScoreModel::PSN)) {
    run.scores.emplace(ScoreModel::PSN, score_psn(d.responses, opt.literal_visibility));
    if (opt.literal_visibility) extra[ScoreModel::PSN] = "visibility=literal";
  }
  if (wanted(ScoreModel::PSI)) {
    run.fit_2pl = fit_2pl(d.responses, opt.fit);
    run.converged &= run.fit_2pl->converged;
    run.scores.emplace(ScoreModel::PSI, score_psi(run.fit_2pl->params, run.fit_2pl->abilities));
  }
  if (wanted(ScoreModel::PSGN) || wanted(ScoreModel::PSGI)) run.levels = assign_levels(*d.granularity, opt.levels);
  if (wanted(ScoreModel::PSGN)) run.scores.emplace(ScoreModel::PSGN, score_psgn(run.levels->levels));
  if (wanted(ScoreModel::PSGI)) {
    run.fit_grm = fit_grm(run.levels->levels, opt.fit);
    run.converged &= run.fit_grm->converged;
    run.scores.emplace(ScoreModel::PSGI, score_psgi(run.fit_grm->params, run.fit_grm->abilities));
  }
  CentralityOptions copt{opt.damping, opt.normalized_betweenness};
  const std::pair<ScoreModel, Centrality> psc[] = {{ScoreModel::PSC_PRC, Centrality::PageRank},
                                                   {ScoreModel::PSC_EVC, Centrality::Eigenvector},
                                                   {ScoreModel::PSC_CC, Centrality::Closeness},
                                                   {ScoreModel::PSC_BC, Centrality::Betweenness}};
  for (auto [m, c] : psc) {
    if (!needs(m)) continue;
    auto r = score_psc(*d.graph, c, copt);
    run.converged &= r.converged;
    run.scores.emplace(m, std::move(r.scores));
  }
  extra[ScoreModel::PSC_PRC] = "damping=" + io::format_double(opt.damping);
  extra[ScoreModel::PSC_BC] = opt.normalized_betweenness ? "normalized=true" : "normalized=false";
  if (needs(ScoreModel::PSNA)) {
    auto rho = run.scores.at(*intrinsic).values();
    const double lo = *std::min_element(rho.begin(), rho.end());
    std::string shift_note;
    if (lo < 0) {
      for (auto& r : rho) r -= lo;
      run.warnings.push_back("intrinsic " + std::string(to_string(*intrinsic)) +
                             " scores have negative values; shifted by " + io::format_double(-lo) + " before propagation");
      shift_note = " intrinsic_shift=" + io::format_double(-lo);
    }
    auto r = score_psna(*d.graph, rho, opt.damping);
    run.converged &= r.converged;
    run.scores.emplace(ScoreModel::PSNA, std::move(r.scores));
    extra[ScoreModel::PSNA] = "damping=" + io::format_double(opt.damping) + " intrinsic=" + opt.intrinsic + shift_note;
  }

  fs::create_directories(out);
  for (auto m : models) {
    std::string meta = "manifest=" + bundle.hash + " model=" + std::string(to_string(m));
    if (extra.count(m)) meta += " " + extra[m];
    io::write_file(out / (model_file_stem(m) + ".csv"), io::format_scores(run.scores.at(m), meta));
  }
  if (run.fit_2pl)
    io::write_file(out / "fit_2pl.json",
                   json{{"manifest_hash", bundle.hash}, {"fit", fit_diagnostics(*run.fit_2pl, d, "2PL")}}.dump(1) + "\n");
  if (run.fit_grm) {
    auto j = fit_diagnostics(*run.fit_grm, d, "GRM");
    json assign = json::array();
    for (const auto& a : run.levels->assignments)
      assign.push_back({{"item_id", d.catalog.id(a.item)}, {"boundaries", a.boundaries}, {"cluster_means", a.cluster_means}});
    j["level_assignment"] = assign;
    io::write_file(out / "fit_grm.json", json{{"manifest_hash", bundle.hash}, {"fit", j}}.dump(1) + "\n");
  }
  std::vector<std::string> names;
  for (auto m : models) names.push_back(model_file_stem(m));
  json runj = {{"manifest_hash", bundle.hash},
               {"tool_version", kVersion},
               {"models", names},
               {"damping", opt.damping},
               {"levels", opt.levels},
               {"intrinsic", opt.intrinsic},
               {"literal_visibility", opt.literal_visibility},
               {"normalized_betweenness", opt.normalized_betweenness},
               {"fit", fit_config_json(opt.fit)},
               {"converged", run.converged},
               {"warnings", run.warnings}};
  io::write_file(out / "run.json", runj.dump(1) + "\n");
  return run;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  fs::path bundle;
  std::optional<fs::path> scores;  ///< defaults to <bundle>/scores
  std::optional<fs::path> out;     ///< defaults to <bundle>/report
  std::vector<std::size_t> k_groups = {3, 4, 6, 8, 10, 12, 14};
  double alpha = 0.05;
  bool spearman = false;
  bool graph_stats = true;
  IrtExpectation irt_expected = IrtExpectation::RestPosterior;
};

struct GofSummary {
  std::string model;
  std::size_t k = 0;
  std::size_t df = 0;
  std::size_t accepted = 0;
  std::size_t tested = 0;
  std::size_t guarded_terms = 0;
};

struct DampingRow {
  double damping = 0.0;
  std::optional<double> psn_prc;
  std::optional<double> psi_prc;
};

struct EvaluateReport {
  std::vector<GofSummary> gof;
  CorrelationMatrix correlations;
  std::vector<DampingRow> damping;
  std::optional<GraphStats> stats;
  std::vector<std::string> warnings;
};

inline std::vector<double> damping_grid() {
  std::vector<double> d;
  for (int k = 0; k < 10; ++k) d.push_back((5.0 + 10.0 * k) / 100.0);
  return d;
}

inline std::string opt_cell(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

/// Goodness of fit, correlations, sensitivity tables, curves and the
/// damping sweep over previously written score files.
inline EvaluateReport cmd_evaluate(const EvaluateOptions& opt) {
  const auto bundle = load_bundle(opt.bundle);
  const auto& d = bundle.data;
  const fs::path sdir = opt.scores.value_or(opt.bundle / "scores");
  const fs::path out = opt.out.value_or(opt.bundle / "report");
  if (!fs::exists(sdir / "run.json")) throw ValidationError("missing score run file: " + (sdir / "run.json").string());
  const auto run = json::parse(io::read_file(sdir / "run.json"));
  if (run.at("manifest_hash").get<std::string>() != bundle.hash)
    throw ValidationError("scores were produced from a different bundle (manifest hash mismatch)");
  if (opt.k_groups.empty()) throw ValidationError("--k-groups must not be empty");
  if (!(opt.alpha > 0 && opt.alpha < 1)) throw ValidationError("--alpha must lie in (0, 1)");
  const int levels = run.at("levels").get<int>();
  const auto nodes = run.at("fit").at("quadrature_nodes").get<std::size_t>();

  std::vector<ScoreModel> models;
  for (const auto& name : run.at("models")) models.push_back(model_from_stem(name.get<std::string>()));
  std::map<ScoreModel, ScoreVector> scores;
  for (auto m : models) {
    const auto path = sdir / (model_file_stem(m) + ".csv");
    if (!fs::exists(path)) throw ValidationError("missing score file: " + path.string());
    scores.emplace(m, io::read_scores(path, d.registry, m));
  }
  auto has = [&](ScoreModel m) { return scores.count(m) > 0; };

  std::optional<ItemParams> p2;
  std::optional<AbilityVector> t2;
  if (has(ScoreModel::PSI)) {
    const auto path = sdir / "fit_2pl.json";
    if (!fs::exists(path)) throw ValidationError("missing fit file: " + path.string());
    const auto j = json::parse(io::read_file(path)).at("fit");
    p2 = item_params_from_json(j.at("params"));
    t2 = abilities_from_json(j, d.registry);
  }
  std::optional<GradedItemParams> pg;
  std::optional<AbilityVector> tg;
  if (has(ScoreModel::PSGI)) {
    const auto path = sdir / "fit_grm.json";
    if (!fs::exists(path)) throw ValidationError("missing fit file: " + path.string());
    const auto j = json::parse(io::read_file(path)).at("fit");
    pg = graded_params_from_json(j.at("params"));
    tg = abilities_from_json(j, d.registry);
  }
  std::optional<GranularityLevelMatrix> glm;
  if (d.kind == DataKind::Granularity && (has(ScoreModel::PSGN) || has(ScoreModel::PSGI)))
    glm = build_level_matrix(*d.granularity, levels);

  EvaluateReport rep;
  const std::string stamp = "# manifest=" + bundle.hash + "\n";

  // Goodness of fit.
  std::string gof = "# manifest=" + bundle.hash + " irt_expected=" + std::string(to_string(opt.irt_expected)) +
                    "\nmodel,K,df,accepted,tested\n";
  std::string gof_items = stamp + "model,K,item_id,chi_square,df,p_value,accepted\n";
  auto record = [&](const std::string& model, std::size_t k, const std::vector<GofResult>& res, std::size_t df) {
    GofSummary s{model, k, df, accepted_count(res), res.size(), 0};
    for (const auto& r : res) {
      s.guarded_terms += r.guarded_terms;
      gof_items += model + "," + std::to_string(k) + "," + io::csv_escape(d.catalog.id(r.item)) + "," +
                   io::format_double(r.chi_square) + "," + std::to_string(r.degrees_of_freedom) + "," +
                   io::format_double(r.p_value) + "," + (r.accepted ? "1" : "0") + "\n";
    }
    if (s.guarded_terms)
      rep.warnings.push_back(model + " K=" + std::to_string(k) + ": " + std::to_string(s.guarded_terms) +
                             " expected count(s) below 1e-9 were clamped");
    gof += model + "," + std::to_string(k) + "," + std::to_string(df) + "," + std::to_string(s.accepted) + "," +
           std::to_string(s.tested) + "\n";
    rep.gof.push_back(s);
  };
  for (auto k : opt.k_groups) {
    if (k < 3) throw ValidationError("--k-groups values must be >= 3 (IRT tests use K-2 degrees of freedom)");
    if (k > d.registry.size()) throw ValidationError("--k-groups value exceeds the number of users");
    if (has(ScoreModel::PSN)) record("PSN", k, goodness_of_fit_naive(d.responses, k, opt.alpha), k - 1);
    if (has(ScoreModel::PSI))
      record("PSI", k, goodness_of_fit_irt(d.responses, *p2, *t2, k, opt.alpha, opt.irt_expected, nodes), k - 2);
    if (has(ScoreModel::PSGN)) record("PSGN", k, goodness_of_fit_graded_naive(*glm, k, opt.alpha), k - 1);
    if (has(ScoreModel::PSGI))
      record("PSGI", k, goodness_of_fit_graded_irt(*glm, *pg, *tg, k, opt.alpha, opt.irt_expected, nodes), k - 2);
  }
  io::write_file(out / "gof.csv", gof);
  io::write_file(out / "gof_items.csv", gof_items);

  // Correlations in a fixed model order.
  std::vector<ScoreVector> ordered;
  for (auto m : {ScoreModel::PSN, ScoreModel::PSI, ScoreModel::PSC_PRC, ScoreModel::PSC_EVC, ScoreModel::PSC_CC,
                 ScoreModel::PSC_BC, ScoreModel::PSNA, ScoreModel::PSGN, ScoreModel::PSGI})
    if (has(m)) ordered.push_back(scores.at(m));
  rep.correlations =
      correlation_matrix(ordered, opt.spearman ? CorrelationMethod::Spearman : CorrelationMethod::Pearson);
  {
    std::string c = "# manifest=" + bundle.hash + " method=" + (opt.spearman ? "spearman" : "pearson") + "\nmodel";
    for (const auto& l : rep.correlations.labels) c += "," + l;
    c += "\n";
    for (std::size_t a = 0; a < rep.correlations.size(); ++a) {
      c += rep.correlations.labels[a];
      for (std::size_t b = 0; b < rep.correlations.size(); ++b) c += "," + opt_cell(rep.correlations(a, b));
      c += "\n";
    }
    io::write_file(out / "correlations.csv", c);
  }

  // Sensitivity comparison tables.
  {
    std::string s = stamp + "family,item_id,level,naive,irt\n";
    if (has(ScoreModel::PSN) || has(ScoreModel::PSI)) {
      const auto naive = naive_sensitivity(d.responses);
      for (std::size_t i = 0; i < d.catalog.size(); ++i) {
        std::optional<double> irt;
        if (p2 && p2->fitted(i)) irt = p2->sensitivity[i];
        s += "policy," + io::csv_escape(d.catalog.id(i)) + ",1," + io::format_double(naive[i]) + "," + opt_cell(irt) + "\n";
      }
    }
    if (glm) {
      const auto naive = naive_graded_sensitivity(*glm);
      for (std::size_t i = 0; i < d.catalog.size(); ++i)
        for (int k = 1; k <= levels; ++k) {
          std::optional<double> irt;
          if (pg && pg->fitted(i))
            if (auto m = pg->items[i].threshold_index(k)) irt = pg->items[i].thresholds[*m];
          s += "granularity," + io::csv_escape(d.catalog.id(i)) + "," + std::to_string(k) + "," +
               io::format_double(naive(i, k)) + "," + opt_cell(irt) + "\n";
        }
    }
    io::write_file(out / "sensitivities.csv", s);
  }

  // Item characteristic curves on [-4, 4] step 0.1, plus each threshold.
  {
    std::string c = stamp + "model,item_id,level,theta,probability\n";
    auto emit = [&](const char* model, std::size_t i, int level, double threshold, auto&& curve) {
      std::vector<double> grid;
      for (int t = 0; t <= 80; ++t) grid.push_back((-40 + t) / 10.0);
      grid.push_back(threshold);
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      const auto probs = curve(grid);
      for (std::size_t g = 0; g < grid.size(); ++g)
        c += std::string(model) + "," + io::csv_escape(d.catalog.id(i)) + "," + std::to_string(level) + "," +
             io::format_double(grid[g]) + "," + io::format_double(probs[g]) + "\n";
    };
    if (p2)
      for (std::size_t i = 0; i < p2->items(); ++i)
        if (p2->fitted(i))
          emit("PSI", i, 1, p2->sensitivity[i], [&](const std::vector<double>& g) { return item_characteristic_curve(*p2, i, g); });
    if (pg)
      for (std::size_t i = 0; i < pg->items.size(); ++i)
        if (pg->fitted(i))
          for (std::size_t m = 0; m < pg->items[i].levels.size(); ++m) {
            const int level = pg->items[i].levels[m];
            emit("PSGI", i, level, pg->items[i].thresholds[m],
                 [&](const std::vector<double>& g) { return item_characteristic_curve(*pg, i, level, g); });
          }
    io::write_file(out / "curves.csv", c);
  }

  // Damping sweep of PageRank against the policy-based scores.
  if (d.graph) {
    std::string s = stamp + "damping,pearson_psn_prc,pearson_psi_prc\n";
    for (double damp : damping_grid()) {
      DampingRow row{damp, {}, {}};
      const auto prc = pagerank(*d.graph, damp).scores;
      auto corr = [&](ScoreModel m) -> std::optional<double> {
        if (!has(m)) return std::nullopt;
        try {
          return pearson(scores.at(m), prc);
        } catch (const NumericalError&) {
          return std::nullopt;
        }
      };
      row.psn_prc = corr(ScoreModel::PSN);
      row.psi_prc = corr(ScoreModel::PSI);
      s += io::format_double(damp) + "," + opt_cell(row.psn_prc) + "," + opt_cell(row.psi_prc) + "\n";
      rep.damping.push_back(row);
    }
    io::write_file(out / "damping.csv", s);
  }

  // Human-readable summary.
  std::string txt = stamp;
  if (d.graph && opt.graph_stats) {
    rep.stats = graph_stats(*d.graph);
    const auto& g = *rep.stats;
    txt += "graph statistics            this dataset    reference crawl\n";
    txt += "  nodes                     " + std::to_string(g.nodes) + std::string(16 - std::min<std::size_t>(15, std::to_string(g.nodes).size()), ' ') + "5389\n";
    txt += "  edges                     " + std::to_string(g.edges) + std::string(16 - std::min<std::size_t>(15, std::to_string(g.edges).size()), ' ') + "40009\n";
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%-16.4f", v);
      return std::string(buf);
    };
    txt += "  average clustering        " + num(g.average_clustering) + "0.0722\n";
    txt += "  diameter                  " + std::to_string(g.diameter) + std::string(16 - std::min<std::size_t>(15, std::to_string(g.diameter).size()), ' ') + "4\n";
    txt += "  average path length       " + num(g.average_path_length) + "2.34\n\n";
  }
  txt += "goodness of fit (accepted items / tested items, alpha=" + io::format_double(opt.alpha) +
         ", irt_expected=" + std::string(to_string(opt.irt_expected)) + ")\n";
  for (const auto& g : rep.gof)
    txt += "  " + g.model + " K=" + std::to_string(g.k) + " df=" + std::to_string(g.df) + ": " +
           std::to_string(g.accepted) + "/" + std::to_string(g.tested) + "\n";
  txt += "  note: granularity tests reuse K-1 (naive) and K-2 (IRT) degrees of freedom\n\n";
  txt += std::string("correlations (") + (opt.spearman ? "spearman" : "pearson") + ")\n";
  for (std::size_t a = 0; a < rep.correlations.size(); ++a)
    for (std::size_t b = a + 1; b < rep.correlations.size(); ++b) {
      auto v = rep.correlations(a, b);
      txt += "  " + rep.correlations.labels[a] + " ~ " + rep.correlations.labels[b] + ": " +
             (v ? io::format_double(std::round(*v * 1000.0) / 1000.0) : std::string("undefined")) + "\n";
    }
  for (const auto& w : rep.warnings) txt += "warning: " + w + "\n";
  io::write_file(out / "summary.txt", txt);
  return rep;
}

}  // namespace privscore::pipeline
