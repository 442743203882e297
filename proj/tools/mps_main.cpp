// Command-line driver: synthetic data generation, plaintext oracle runs,
// in-process simulated secure runs, networked party mode, and brute-force
// verification of the lattice engine.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mps/lattice.hpp"
#include "mps/roles.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void emit(const ordered_json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << std::endl;
  } else {
    std::ofstream out(out_path);
    if (!out) throw mps::ValueError("cannot write " + out_path);
    out << report.dump(2) << "\n";
  }
}

mps::DataTable load_tables_concat(const std::vector<std::string>& paths,
                                  const mps::Schema& schema) {
  std::vector<mps::DataTable> tables;
  for (const auto& p : paths) tables.push_back(mps::load_csv(p, schema));
  return mps::concat_tables(tables);
}

ordered_json transcript_summary(const mps::Transcript& t) {
  char digest_hex[17];
  std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                static_cast<unsigned long long>(t.digest()));
  ordered_json j;
  j["entries"] = t.entries.size();
  j["digest"] = std::string(digest_hex);
  j["comparison_bits"] = t.count_class(mps::LeakageClass::ComparisonBit);
  j["inserted_records"] = t.count_class(mps::LeakageClass::InsertedRecord);
  j["masked_openings"] = t.count_class(mps::LeakageClass::MaskedComparisonValue) +
                         t.count_class(mps::LeakageClass::MaskedLookupIndex);
  return j;
}

ordered_json audit_json(const mps::AuditReport& a) {
  ordered_json j;
  j["pass"] = a.pass;
  j["violations"] = a.violations;
  return j;
}

// --- gen -------------------------------------------------------------------

struct GenArgs {
  int n = 4;
  int64_t m = 100;
  std::vector<int> arities;
  int arity = 2;
  int shards = 1;
  uint64_t seed = 1;
  double noise = 0.1;
  std::string out_dir = "gen_out";
};

int cmd_gen(const GenArgs& args) {
  if (args.n < 1 || args.m < 0 || args.shards < 1) throw mps::ValueError("gen: bad parameters");
  std::vector<int> arities = args.arities;
  if (arities.empty()) arities.assign(args.n, args.arity);
  if (static_cast<int>(arities.size()) != args.n)
    throw mps::ValueError("gen: arities list must have n entries");

  mps::Schema schema;
  for (int v = 0; v < args.n; ++v)
    schema.variables.push_back({"X" + std::to_string(v), arities[v], {}});
  schema.m_max = std::max<int64_t>(args.m, 1);
  schema.validate();

  mps::Prg g(args.seed, {0x67656e});
  struct Planted {
    std::vector<int> parents;
    std::vector<int> weights;
    int offset = 0;
  };
  std::vector<Planted> planted(args.n);
  for (int v = 1; v < args.n; ++v) {
    bool plant = (v == args.n - 1) || (g.next_below(2) == 1);
    if (!plant) continue;
    int max_parents = std::min(2, v);
    int k = 1 + static_cast<int>(g.next_below(max_parents));
    std::vector<int> pool(v);
    for (int i = 0; i < v; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i)
      std::swap(pool[i], pool[i + g.next_below(v - i)]);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    Planted p;
    p.parents = pool;
    for (int i = 0; i < k; ++i)
      p.weights.push_back(1 + static_cast<int>(g.next_below(arities[v] - 1 > 0 ? arities[v] - 1 : 1)));
    p.offset = static_cast<int>(g.next_below(arities[v]));
    planted[v] = std::move(p);
  }

  mps::DataTable all;
  all.n_vars = args.n;
  uint64_t noise_den = 1 << 20;
  auto noise_num = static_cast<uint64_t>(args.noise * static_cast<double>(noise_den));
  std::vector<uint8_t> row(args.n);
  for (int64_t i = 0; i < args.m; ++i) {
    for (int v = 0; v < args.n; ++v) {
      const auto& p = planted[v];
      if (!p.parents.empty() && g.next_below(noise_den) >= noise_num) {
        int64_t acc = p.offset;
        for (size_t t = 0; t < p.parents.size(); ++t)
          acc += static_cast<int64_t>(p.weights[t]) * row[p.parents[t]];
        row[v] = static_cast<uint8_t>(acc % arities[v]);
      } else {
        row[v] = static_cast<uint8_t>(g.next_below(arities[v]));
      }
    }
    all.append_row(row);
  }

  fs::create_directories(args.out_dir);
  std::string schema_path = (fs::path(args.out_dir) / "schema.json").string();
  {
    std::ofstream out(schema_path);
    out << mps::schema_to_json(schema).dump(2) << "\n";
  }
  std::vector<mps::DataTable> shards(args.shards);
  for (auto& s : shards) s.n_vars = args.n;
  for (int64_t i = 0; i < all.rows(); ++i) {
    std::vector<uint8_t> r(args.n);
    for (int v = 0; v < args.n; ++v) r[v] = all.at(i, v);
    shards[i % args.shards].append_row(r);
  }
  ordered_json report;
  report["schema"] = schema_path;
  report["files"] = ordered_json::array();
  for (int s = 0; s < args.shards; ++s) {
    std::string path = (fs::path(args.out_dir) / ("owner" + std::to_string(s) + ".csv")).string();
    mps::write_csv(path, schema, shards[s]);
    report["files"].push_back(path);
  }
  report["planted"] = ordered_json::object();
  for (int v = 0; v < args.n; ++v) {
    if (planted[v].parents.empty()) continue;
    ordered_json parents = ordered_json::array();
    for (int p : planted[v].parents) parents.push_back("X" + std::to_string(p));
    report["planted"]["X" + std::to_string(v)] = parents;
  }
  std::cout << report.dump(2) << std::endl;
  return 0;
}

// --- oracle ------------------------------------------------------------------

int cmd_oracle(const std::string& schema_path, const std::vector<std::string>& data,
               const std::string& target, int lmax, const std::string& mode_str,
               const std::string& precision, bool empty_penalty, const std::string& out) {
  auto schema = mps::load_schema(schema_path);
  auto table = load_tables_concat(data, schema);
  int target_idx = schema.index_of(target);
  auto mode = mps::traversal_mode_from_string(mode_str);
  int eff_lmax = lmax < 0 ? schema.n() - 1 : lmax;
  mps::FieldParams params;

  auto t0 = std::chrono::steady_clock::now();
  mps::PGStructure pg;
  if (precision == "fixed") {
    mps::QuantizedBackend backend(table, schema, target_idx, params);
    pg = mps::maximal_parent_sets(backend, eff_lmax, mode, empty_penalty);
  } else if (precision == "float") {
    mps::FloatBackend backend(table, schema, target_idx, params);
    pg = mps::maximal_parent_sets(backend, eff_lmax, mode, empty_penalty);
  } else {
    throw mps::ValueError("precision must be float or fixed");
  }
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();

  ordered_json report;
  report["command"] = "oracle";
  report["precision"] = precision;
  report["rows"] = table.rows();
  report["pg"] = mps::pg_to_json(pg, schema, target_idx, mode, params.f);
  report["timing_ms"] = {{"total", ms}};
  emit(report, out);
  return 0;
}

// --- sim -------------------------------------------------------------------

int cmd_sim(const std::string& schema_path, const std::vector<std::string>& data,
            const std::string& target, int lmax, const std::string& mode_str, int csps,
            uint64_t seed, bool empty_penalty, const std::string& out) {
  auto schema = mps::load_schema(schema_path);
  std::vector<mps::DataTable> tables;
  for (const auto& p : data) tables.push_back(mps::load_csv(p, schema));

  mps::SessionConfig cfg;
  cfg.schema = schema;
  cfg.target = target;
  cfg.l_max = lmax;
  cfg.mode = mps::traversal_mode_from_string(mode_str);
  cfg.empty_set_penalty = empty_penalty;
  cfg.n_csps = csps;
  cfg.n_owners = static_cast<int>(tables.size());
  cfg = mps::SessionConfig::with_seed(cfg, seed);

  auto sim = mps::run_sim(cfg, tables);

  auto combined = mps::concat_tables(tables);
  mps::QuantizedBackend oracle(combined, schema, cfg.target_index(), cfg.params);
  auto oracle_pg =
      mps::maximal_parent_sets(oracle, cfg.effective_lmax(), cfg.mode, cfg.empty_set_penalty);

  ordered_json report;
  report["command"] = "sim";
  report["csps"] = csps;
  report["owners"] = cfg.n_owners;
  report["pg"] = mps::pg_to_json(sim.pg, schema, cfg.target_index(), cfg.mode, cfg.params.f);
  report["oracle_match"] = (sim.pg == oracle_pg);
  report["timing_ms"] = {{"setup", sim.timings.setup_ms},
                         {"traversal", sim.timings.traversal_ms},
                         {"total", sim.total_ms}};
  report["transcript"] = transcript_summary(sim.transcript);
  report["audit"] = audit_json(sim.audit);
  emit(report, out);
  return sim.audit.pass && sim.pg == oracle_pg ? 0 : 1;
}

// --- party -------------------------------------------------------------------

int cmd_party(const std::string& role, int index, const std::string& config_path,
              const std::string& data_path, const std::string& out) {
  std::ifstream in(config_path);
  if (!in) throw mps::ValueError("cannot open config " + config_path);
  nlohmann::json j;
  in >> j;
  auto cfg = mps::SessionConfig::from_json(j);
  cfg.validate();
  if (static_cast<int>(cfg.csp_endpoints.size()) != cfg.n_csps)
    throw mps::ValueError("config: csp_endpoints must list one endpoint per CSP");
  std::vector<mps::Endpoint> eps;
  for (const auto& e : cfg.csp_endpoints) eps.push_back(mps::parse_endpoint(e));

  mps::PartyId me;
  if (role == "csp")
    me = mps::PartyId::csp(index);
  else if (role == "do")
    me = mps::PartyId::owner(index);
  else if (role == "dealer")
    me = mps::PartyId::dealer();
  else
    throw mps::ValueError("role must be do, csp or dealer");

  auto owned = mps::establish_tcp_links(me, eps, cfg.n_owners);
  mps::PeerChannels peers;
  for (auto& [id, ch] : owned) peers[id] = ch.get();

  if (me.role == mps::PartyId::Role::Dealer) {
    mps::run_dealer(cfg, peers);
    return 0;
  }
  if (me.role == mps::PartyId::Role::Owner) {
    if (data_path.empty()) throw mps::ValueError("data owners need --data");
    auto table = mps::load_csv(data_path, cfg.schema);
    auto pg = mps::run_data_owner(cfg, index, table, peers);
    ordered_json report;
    report["command"] = "party";
    report["role"] = "do";
    report["index"] = index;
    report["pg"] = mps::pg_to_json(pg, cfg.schema, cfg.target_index(), cfg.mode, cfg.params.f);
    emit(report, out);
    return 0;
  }
  auto res = mps::run_csp(cfg, index, peers);
  auto audit = mps::transcript_audit(res.transcript, res.pg, res.candidates_scored);
  ordered_json report;
  report["command"] = "party";
  report["role"] = "csp";
  report["index"] = index;
  report["pg"] = mps::pg_to_json(res.pg, cfg.schema, cfg.target_index(), cfg.mode, cfg.params.f);
  report["timing_ms"] = {{"setup", res.timings.setup_ms},
                         {"traversal", res.timings.traversal_ms}};
  report["transcript"] = transcript_summary(res.transcript);
  report["audit"] = audit_json(audit);
  emit(report, out);
  return audit.pass ? 0 : 1;
}

// --- verify ------------------------------------------------------------------

int cmd_verify(const std::string& schema_path, const std::vector<std::string>& data,
               const std::string& target, int lmax, bool empty_penalty, bool corrupt,
               const std::string& out) {
  auto schema = mps::load_schema(schema_path);
  if (schema.n() > 16) throw mps::ValueError("verify: too many variables to enumerate");
  auto table = load_tables_concat(data, schema);
  int target_idx = schema.index_of(target);
  int eff_lmax = lmax < 0 ? schema.n() - 1 : lmax;
  mps::FieldParams params;

  mps::QuantizedBackend backend(table, schema, target_idx, params);
  auto engine_pg =
      mps::maximal_parent_sets(backend, eff_lmax, mps::TraversalMode::Corrected, empty_penalty);
  if (corrupt && !engine_pg.records.empty()) engine_pg.records.front().score2.mantissa += 1;
  auto oracle_pg = mps::brute_force_mps(table, schema, target_idx, eff_lmax, params, empty_penalty);

  ordered_json diffs = ordered_json::array();
  size_t n = std::max(engine_pg.records.size(), oracle_pg.records.size());
  for (size_t i = 0; i < n; ++i) {
    auto render = [&](const mps::PGStructure& pg) -> ordered_json {
      if (i >= pg.records.size()) return nullptr;
      ordered_json r;
      r["set"] = ordered_json::array();
      for (int v : pg.records[i].set) r["set"].push_back(schema.variables[v].name);
      r["score2_mantissa"] = pg.records[i].score2.mantissa;
      return r;
    };
    bool same = i < engine_pg.records.size() && i < oracle_pg.records.size() &&
                engine_pg.records[i] == oracle_pg.records[i];
    if (!same) diffs.push_back({{"record", i}, {"engine", render(engine_pg)},
                                {"brute_force", render(oracle_pg)}});
  }

  ordered_json report;
  report["command"] = "verify";
  report["pass"] = diffs.empty();
  report["records"] = oracle_pg.records.size();
  report["diffs"] = diffs;
  emit(report, out);
  if (diffs.empty()) {
    std::cerr << "verify: PASS (" << oracle_pg.records.size() << " records)\n";
    return 0;
  }
  std::cerr << "verify: FAIL (" << diffs.size() << " divergent records)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving maximal parent set learning"};
  app.require_subcommand(1);

  // gen
  GenArgs gen;
  auto* sub_gen = app.add_subcommand("gen", "Generate synthetic categorical data");
  sub_gen->add_option("--n", gen.n, "variable count");
  sub_gen->add_option("--m", gen.m, "row count");
  sub_gen->add_option("--arity", gen.arity, "uniform arity");
  sub_gen->add_option("--arities", gen.arities, "per-variable arities");
  sub_gen->add_option("--shards", gen.shards, "number of owner shards");
  sub_gen->add_option("--seed", gen.seed, "rng seed");
  sub_gen->add_option("--noise", gen.noise, "noise rate for planted dependencies");
  sub_gen->add_option("--out", gen.out_dir, "output directory");

  // shared options
  std::string schema_path, target, mode = "corrected", out, precision = "fixed";
  std::vector<std::string> data;
  int lmax = -1, csps = 3, index = 0;
  uint64_t seed = 1;
  bool empty_penalty = false, corrupt = false;
  std::string role, config_path, data_path;

  auto* sub_oracle = app.add_subcommand("oracle", "Plaintext reference run");
  sub_oracle->add_option("--schema", schema_path)->required();
  sub_oracle->add_option("--data", data, "one csv per owner")->required();
  sub_oracle->add_option("--target", target)->required();
  sub_oracle->add_option("--lmax", lmax, "max candidate cardinality (-1: n-1)");
  sub_oracle->add_option("--mode", mode)->check(CLI::IsMember({"verbatim", "corrected"}));
  sub_oracle->add_option("--precision", precision)->check(CLI::IsMember({"float", "fixed"}));
  sub_oracle->add_flag("--empty-set-penalty", empty_penalty);
  sub_oracle->add_option("--out", out);

  auto* sub_sim = app.add_subcommand("sim", "All roles in-process over the secure protocol");
  sub_sim->add_option("--schema", schema_path)->required();
  sub_sim->add_option("--data", data, "one csv per owner")->required();
  sub_sim->add_option("--target", target)->required();
  sub_sim->add_option("--lmax", lmax);
  sub_sim->add_option("--mode", mode)->check(CLI::IsMember({"verbatim", "corrected"}));
  sub_sim->add_option("--csps", csps);
  sub_sim->add_option("--seed", seed);
  sub_sim->add_flag("--empty-set-penalty", empty_penalty);
  sub_sim->add_option("--out", out);

  auto* sub_party = app.add_subcommand("party", "Run one party over TCP");
  sub_party->add_option("--role", role)->required()->check(CLI::IsMember({"do", "csp", "dealer"}));
  sub_party->add_option("--index", index);
  sub_party->add_option("--config", config_path)->required();
  sub_party->add_option("--data", data_path, "owner data csv");
  sub_party->add_option("--out", out);

  auto* sub_verify = app.add_subcommand("verify", "Lattice engine vs brute-force oracle");
  sub_verify->add_option("--schema", schema_path)->required();
  sub_verify->add_option("--data", data)->required();
  sub_verify->add_option("--target", target)->required();
  sub_verify->add_option("--lmax", lmax);
  sub_verify->add_flag("--empty-set-penalty", empty_penalty);
  sub_verify->add_flag("--self-check-corrupt", corrupt)->group("");  // test hook
  sub_verify->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sub_gen->parsed()) return cmd_gen(gen);
    if (sub_oracle->parsed())
      return cmd_oracle(schema_path, data, target, lmax, mode, precision, empty_penalty, out);
    if (sub_sim->parsed())
      return cmd_sim(schema_path, data, target, lmax, mode, csps, seed, empty_penalty, out);
    if (sub_party->parsed()) return cmd_party(role, index, config_path, data_path, out);
    if (sub_verify->parsed())
      return cmd_verify(schema_path, data, target, lmax, empty_penalty, corrupt, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
