#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mps/util.hpp"

namespace mps {

using VarSet = std::vector<int>;  // sorted ascending global variable indices

struct Variable {
  std::string name;
  int arity = 2;
  std::vector<std::string> states;  // optional labels, size arity when present
};

// Public metadata agreed on by all data owners: variable encoding and the
// public cap m_max on the total instance count. Row counts themselves stay
// private.
struct Schema {
  std::vector<Variable> variables;
  int64_t m_max = 4096;

  int n() const { return static_cast<int>(variables.size()); }

  int index_of(const std::string& name) const {
    for (int i = 0; i < n(); ++i)
      if (variables[i].name == name) return i;
    throw ValueError("schema: unknown variable '" + name + "'");
  }

  void validate() const {
    if (variables.empty()) throw ValueError("schema: no variables");
    if (m_max < 1) throw ValueError("schema: m_max must be >= 1");
    for (const auto& v : variables) {
      if (v.arity < 2) throw ValueError("schema: arity must be >= 2 for " + v.name);
      if (!v.states.empty() && static_cast<int>(v.states.size()) != v.arity)
        throw ValueError("schema: state labels do not match arity for " + v.name);
    }
    for (int i = 0; i < n(); ++i)
      for (int j = i + 1; j < n(); ++j)
        if (variables[i].name == variables[j].name)
          throw ValueError("schema: duplicate variable name " + variables[i].name);
  }
};

// Complete rows of state indices, one column per schema variable.
struct DataTable {
  int n_vars = 0;
  std::vector<uint8_t> cells;  // row-major, rows() * n_vars

  int64_t rows() const { return n_vars == 0 ? 0 : static_cast<int64_t>(cells.size()) / n_vars; }
  uint8_t at(int64_t row, int var) const { return cells[row * n_vars + var]; }

  void append_row(std::span<const uint8_t> row) {
    cells.insert(cells.end(), row.begin(), row.end());
  }

  void validate(const Schema& schema) const {
    if (n_vars != schema.n()) throw ValueError("table: column count does not match schema");
    for (int64_t r = 0; r < rows(); ++r)
      for (int v = 0; v < n_vars; ++v)
        if (at(r, v) >= schema.variables[v].arity)
          throw ValueError("table: state out of range at row " + std::to_string(r));
  }
};

inline DataTable concat_tables(std::span<const DataTable> tables) {
  DataTable out;
  if (tables.empty()) return out;
  out.n_vars = tables.front().n_vars;
  for (const auto& t : tables) {
    if (t.n_vars != out.n_vars) throw ValueError("concat: column mismatch");
    out.cells.insert(out.cells.end(), t.cells.begin(), t.cells.end());
  }
  return out;
}

inline int64_t joint_states(const Schema& schema, const VarSet& U) {
  int64_t q = 1;
  for (int v : U) q *= schema.variables[v].arity;
  return q;
}

// Mixed-radix cell rank. The first (lowest-index) variable of U has
// stride 1; each later variable's stride is the product of the arities of
// the variables before it. This ordering is shared by every oracle and
// wire message.
inline int64_t radix_index(std::span<const int> states, const VarSet& U, const Schema& schema) {
  if (states.size() != U.size()) throw ValueError("radix_index: arity mismatch");
  int64_t j = 0, stride = 1;
  for (size_t t = 0; t < U.size(); ++t) {
    int arity = schema.variables[U[t]].arity;
    if (states[t] < 0 || states[t] >= arity) throw ValueError("radix_index: state out of range");
    j += static_cast<int64_t>(states[t]) * stride;
    stride *= arity;
  }
  return j;
}

// Joint counts of (candidate set state j, target state k) over a table.
// counts[j * r_i + k] = N_ijk; N_ij is the sum over k.
struct ContingencyVector {
  int target = 0;
  VarSet parents;
  int r_target = 0;
  int64_t q = 1;                // number of joint parent states
  std::vector<int64_t> counts;  // length q * r_target

  int64_t n_ijk(int64_t j, int k) const { return counts[j * r_target + k]; }
  int64_t n_ij(int64_t j) const {
    int64_t s = 0;
    for (int k = 0; k < r_target; ++k) s += counts[j * r_target + k];
    return s;
  }
  int64_t total() const {
    int64_t s = 0;
    for (int64_t c : counts) s += c;
    return s;
  }
};

inline ContingencyVector contingency(const DataTable& table, const Schema& schema, int target,
                                     const VarSet& U) {
  for (int v : U)
    if (v == target) throw ValueError("contingency: candidate set contains the target");
  if (!std::is_sorted(U.begin(), U.end())) throw ValueError("contingency: set not sorted");
  ContingencyVector out;
  out.target = target;
  out.parents = U;
  out.r_target = schema.variables[target].arity;
  out.q = joint_states(schema, U);
  out.counts.assign(out.q * out.r_target, 0);
  std::vector<int> states(U.size());
  for (int64_t r = 0; r < table.rows(); ++r) {
    for (size_t t = 0; t < U.size(); ++t) states[t] = table.at(r, U[t]);
    int64_t j = radix_index(states, U, schema);
    out.counts[j * out.r_target + table.at(r, target)]++;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schema JSON and CSV ingestion.

inline nlohmann::ordered_json schema_to_json(const Schema& s) {
  nlohmann::ordered_json j;
  j["variables"] = nlohmann::ordered_json::array();
  for (const auto& v : s.variables) {
    nlohmann::ordered_json jv;
    jv["name"] = v.name;
    jv["arity"] = v.arity;
    if (!v.states.empty()) jv["states"] = v.states;
    j["variables"].push_back(jv);
  }
  j["m_max"] = s.m_max;
  return j;
}

inline Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  for (const auto& jv : j.at("variables")) {
    Variable v;
    v.name = jv.at("name").get<std::string>();
    v.arity = jv.at("arity").get<int>();
    if (jv.contains("states")) v.states = jv.at("states").get<std::vector<std::string>>();
    s.variables.push_back(std::move(v));
  }
  if (j.contains("m_max")) s.m_max = j.at("m_max").get<int64_t>();
  s.validate();
  return s;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open schema file " + path);
  nlohmann::json j;
  in >> j;
  return schema_from_json(j);
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t");
    s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
  }
  return out;
}

inline int resolve_state(const std::string& cell, const Variable& var, int64_t row_no) {
  for (size_t k = 0; k < var.states.size(); ++k)
    if (var.states[k] == cell) return static_cast<int>(k);
  try {
    size_t pos = 0;
    int code = std::stoi(cell, &pos);
    if (pos == cell.size() && code >= 0 && code < var.arity) return code;
  } catch (...) {
  }
  throw ValueError("csv row " + std::to_string(row_no) + ": unknown state '" + cell + "' for " +
                   var.name);
}
}  // namespace detail

// Header row must match the schema's variable order; cells are integer
// state codes or labels resolvable through the schema.
inline DataTable load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open data file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValueError("csv: missing header in " + path);
  auto header = detail::split_csv_line(line);
  if (static_cast<int>(header.size()) != schema.n())
    throw ValueError("csv: header width does not match schema in " + path);
  for (int i = 0; i < schema.n(); ++i)
    if (header[i] != schema.variables[i].name)
      throw ValueError("csv: header column '" + header[i] + "' does not match schema variable '" +
                       schema.variables[i].name + "'");
  DataTable t;
  t.n_vars = schema.n();
  int64_t row_no = 1;
  std::vector<uint8_t> row(schema.n());
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != schema.n())
      throw ValueError("csv row " + std::to_string(row_no) + ": ragged row");
    for (int i = 0; i < schema.n(); ++i)
      row[i] = static_cast<uint8_t>(detail::resolve_state(cells[i], schema.variables[i], row_no));
    t.append_row(row);
  }
  return t;
}

inline void write_csv(const std::string& path, const Schema& schema, const DataTable& table) {
  std::ofstream out(path);
  if (!out) throw ValueError("cannot write " + path);
  for (int i = 0; i < schema.n(); ++i) out << (i ? "," : "") << schema.variables[i].name;
  out << "\n";
  for (int64_t r = 0; r < table.rows(); ++r) {
    for (int i = 0; i < schema.n(); ++i) {
      const auto& v = schema.variables[i];
      int code = table.at(r, i);
      out << (i ? "," : "");
      if (!v.states.empty())
        out << v.states[code];
      else
        out << code;
    }
    out << "\n";
  }
}

}  // namespace mps
