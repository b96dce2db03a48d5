#include "gridcfc/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>

#include "gridcfc/error.hpp"

namespace gridcfc {

using nlohmann::json;

double GridCase::total_load_mw() const {
  double total = 0.0;
  for (const auto& load : loads) total += load.p;
  return total;
}

int GridCase::bus_position(int bus_id) const {
  for (int i = 0; i < num_buses(); ++i)
    if (buses[i].id == bus_id) return i;
  return -1;
}

std::string GridCase::branch_label(int branch_index) const {
  const auto& br = branches.at(branch_index);
  return std::to_string(br.id) + "(" + std::to_string(buses[br.from].id) + "-" +
         std::to_string(buses[br.to].id) + ")";
}

void validate_case(const GridCase& grid) {
  std::vector<std::string> problems;
  auto bad = [&](const std::string& s) { problems.push_back(s); };
  const int nb = grid.num_buses();

  if (!(grid.base_mva > 0.0)) bad("base_mva must be positive");
  if (grid.buses.empty()) bad("no buses");
  if (grid.branches.empty()) bad("no branches");

  std::map<int, int> seen;
  for (int i = 0; i < nb; ++i) {
    const auto& b = grid.buses[i];
    if (!seen.emplace(b.id, i).second) bad("bus " + std::to_string(b.id) + ": duplicate id");
    if (!(b.v_min > 0.0 && b.v_min < b.v_max))
      bad("bus " + std::to_string(b.id) + ": require 0 < v_min < v_max");
  }
  for (int l = 0; l < grid.num_branches(); ++l) {
    const auto& br = grid.branches[l];
    const std::string tag = "branch " + std::to_string(l + 1);
    if (br.id != l + 1) bad(tag + ": id must equal its position (" + std::to_string(br.id) + ")");
    if (br.from < 0 || br.from >= nb || br.to < 0 || br.to >= nb) {
      bad(tag + ": endpoint references unknown bus");
      continue;
    }
    if (br.from == br.to) bad(tag + ": self-loop");
    if (br.x == 0.0) bad(tag + ": zero reactance");
    if (!(br.f_lim1 > 0.0 && br.f_lim2 >= br.f_lim1)) bad(tag + ": require f_lim2 >= f_lim1 > 0");
    if (!(br.hidden_failure_prob >= 0.0 && br.hidden_failure_prob <= 1.0))
      bad(tag + ": hidden_failure_prob outside [0,1]");
    if (!(br.tap > 0.0)) bad(tag + ": tap must be positive");
  }
  for (const auto& g : grid.generators) {
    const std::string tag = "generator " + std::to_string(g.id);
    if (g.bus < 0 || g.bus >= nb) bad(tag + ": unknown bus");
    if (g.p_min > g.p_max) bad(tag + ": p_min > p_max");
    if (g.q_min > g.q_max) bad(tag + ": q_min > q_max");
    if (g.slack_coeff > 1.0) bad(tag + ": slack_coeff > 1");
  }
  for (const auto& d : grid.loads) {
    const std::string tag = "load " + std::to_string(d.id);
    if (d.bus < 0 || d.bus >= nb) bad(tag + ": unknown bus");
    if (d.p < 0.0) bad(tag + ": negative active power");
  }
  if (problems.empty()) return;
  std::string msg = "invalid case:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw Error(ErrorCode::InvalidCase, msg);
}

CaseFormat parse_case_format(const std::string& tag) {
  if (tag.empty() || tag == "auto") return CaseFormat::Auto;
  if (tag == "json") return CaseFormat::Json;
  if (tag == "matpower" || tag == "m") return CaseFormat::Matpower;
  throw Error(ErrorCode::InvalidArgument, "unknown case format '" + tag + "'");
}

namespace {

struct MatBlock {
  std::vector<std::vector<double>> rows;
  std::vector<int> lines;  // source line of each row
};

// Extracts `mpc.<name> = [ ... ];` as numeric rows.
MatBlock matpower_block(const std::string& text, const std::string& name, bool required) {
  MatBlock out;
  const std::string key = "mpc." + name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool inside = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pct = line.find('%'); pct != std::string::npos) line.erase(pct);
    if (!inside) {
      auto pos = line.find(key);
      if (pos == std::string::npos) continue;
      auto after = line.substr(pos + key.size());
      auto bracket = after.find('[');
      if (after.find_first_not_of(" \t=") != after.find('[') || bracket == std::string::npos)
        continue;
      inside = true;
      line = after.substr(bracket + 1);
    }
    bool done = false;
    if (auto close = line.find(']'); close != std::string::npos) {
      line.erase(close);
      done = true;
    }
    // A line may hold several ';'-separated rows.
    std::stringstream rows(line);
    std::string row;
    while (std::getline(rows, row, ';')) {
      std::istringstream fields(row);
      std::vector<double> values;
      std::string tok;
      while (fields >> tok) {
        if (tok == "Inf" || tok == "inf") {
          values.push_back(INFINITY);
          continue;
        }
        if (tok == "-Inf" || tok == "-inf") {
          values.push_back(-INFINITY);
          continue;
        }
        try {
          size_t used = 0;
          values.push_back(std::stod(tok, &used));
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": mpc." + name +
                                            ": bad number '" + tok + "'");
        }
      }
      if (!values.empty()) {
        out.rows.push_back(std::move(values));
        out.lines.push_back(lineno);
      }
    }
    if (done) return out;
  }
  if (inside) throw Error(ErrorCode::Parse, "mpc." + name + ": missing closing ']'");
  if (required) throw Error(ErrorCode::Parse, "missing mpc." + name + " block");
  return out;
}

void need_columns(const MatBlock& block, size_t row, size_t n, const char* name) {
  if (block.rows[row].size() < n)
    throw Error(ErrorCode::Parse, "line " + std::to_string(block.lines[row]) + ": mpc." + name +
                                      " row has " + std::to_string(block.rows[row].size()) +
                                      " columns, need " + std::to_string(n));
}

}  // namespace

GridCase parse_matpower(const std::string& text, const MatpowerOptions& opts) {
  GridCase grid;
  static const std::regex fn_re(R"(function\s+\w+\s*=\s*(\w+))");
  std::smatch m;
  if (std::regex_search(text, m, fn_re)) grid.name = m[1];
  static const std::regex base_re(R"(mpc\.baseMVA\s*=\s*([-+0-9.eE]+))");
  if (!std::regex_search(text, m, base_re))
    throw Error(ErrorCode::Parse, "missing mpc.baseMVA");
  grid.base_mva = std::stod(m[1]);

  auto bus = matpower_block(text, "bus", true);
  auto gen = matpower_block(text, "gen", false);
  auto branch = matpower_block(text, "branch", true);

  std::map<int, int> pos;
  for (size_t i = 0; i < bus.rows.size(); ++i) {
    need_columns(bus, i, 13, "bus");
    const auto& r = bus.rows[i];
    Bus b;
    b.id = static_cast<int>(r[0]);
    const int type = static_cast<int>(r[1]);
    b.type = type == 3 ? BusType::Ref : type == 2 ? BusType::PV : BusType::PQ;
    b.gs = r[4];
    b.bs = r[5];
    b.area = static_cast<int>(r[6]);
    b.base_kv = r[9];
    b.v_max = r[11];
    b.v_min = r[12];
    if (type == 4) continue;  // isolated bus
    if (!pos.emplace(b.id, static_cast<int>(grid.buses.size())).second)
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(bus.lines[i]) + ": duplicate bus " + std::to_string(b.id));
    grid.buses.push_back(b);
    if (r[2] != 0.0 || r[3] != 0.0) {
      Load d;
      d.id = static_cast<int>(grid.loads.size()) + 1;
      d.bus = static_cast<int>(grid.buses.size()) - 1;
      d.p = r[2];
      d.q = r[3];
      grid.loads.push_back(d);
    }
  }
  auto lookup = [&](double id, int line) {
    auto it = pos.find(static_cast<int>(id));
    if (it == pos.end())
      throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": unknown bus " +
                                        std::to_string(static_cast<int>(id)));
    return it->second;
  };

  for (size_t i = 0; i < gen.rows.size(); ++i) {
    need_columns(gen, i, 10, "gen");
    const auto& r = gen.rows[i];
    if (r[7] <= 0.0) continue;
    Generator g;
    g.id = static_cast<int>(grid.generators.size()) + 1;
    g.bus = lookup(r[0], gen.lines[i]);
    g.p = r[1];
    g.q = r[2];
    g.q_max = r[3];
    g.q_min = r[4];
    g.v_set = r[5];
    g.p_max = r[8];
    g.p_min = r[9];
    grid.generators.push_back(g);
  }

  for (size_t i = 0; i < branch.rows.size(); ++i) {
    need_columns(branch, i, 11, "branch");
    const auto& r = branch.rows[i];
    if (r[10] <= 0.0) continue;
    Branch br;
    br.id = static_cast<int>(grid.branches.size()) + 1;
    br.from = lookup(r[0], branch.lines[i]);
    br.to = lookup(r[1], branch.lines[i]);
    br.r = r[2];
    br.x = r[3];
    br.b_shunt = r[4];
    const double rate_a = r[5] > 0.0 ? r[5] : opts.unlimited_rating_mw;
    const double rate_c = r[7];
    br.f_lim1 = rate_a;
    br.f_lim2 = (r[5] > 0.0 && rate_c > rate_a) ? rate_c : opts.f_lim2_ratio * rate_a;
    br.tap = r[8] != 0.0 ? r[8] : 1.0;
    br.shift_deg = r[9];
    br.hidden_failure_prob = opts.hidden_failure_prob;
    const double kv_from = grid.buses[br.from].base_kv;
    const double kv_to = grid.buses[br.to].base_kv;
    br.transformer = r[8] != 0.0 || (kv_from > 0.0 && kv_to > 0.0 && kv_from != kv_to);
    grid.branches.push_back(br);
  }
  validate_case(grid);
  return grid;
}

namespace {

const char* bus_type_name(BusType t) {
  switch (t) {
    case BusType::Ref: return "ref";
    case BusType::PV: return "pv";
    default: return "pq";
  }
}

BusType bus_type_from(const std::string& s) {
  if (s == "ref") return BusType::Ref;
  if (s == "pv") return BusType::PV;
  if (s == "pq") return BusType::PQ;
  throw Error(ErrorCode::Parse, "unknown bus type '" + s + "'");
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::Parse, where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, where + ": field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return field<T>(obj, key, where);
}

}  // namespace

GridCase case_from_json(const json& j) {
  GridCase grid;
  try {
    grid.name = j.value("name", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("name: ") + e.what());
  }
  grid.base_mva = field<double>(j, "base_mva", "case");
  std::map<int, int> pos;
  const auto& buses = field<json>(j, "buses", "case");
  for (size_t i = 0; i < buses.size(); ++i) {
    const auto& o = buses[i];
    const std::string where = "buses[" + std::to_string(i) + "]";
    Bus b;
    b.id = field<int>(o, "id", where);
    b.type = bus_type_from(field_or<std::string>(o, "type", "pq", where));
    b.gs = field_or(o, "gs", 0.0, where);
    b.bs = field_or(o, "bs", 0.0, where);
    b.base_kv = field_or(o, "base_kv", 0.0, where);
    b.v_min = field_or(o, "v_min", 0.9, where);
    b.v_max = field_or(o, "v_max", 1.1, where);
    b.area = field_or(o, "area", 1, where);
    if (!pos.emplace(b.id, static_cast<int>(i)).second)
      throw Error(ErrorCode::Parse, where + ": duplicate bus id " + std::to_string(b.id));
    grid.buses.push_back(b);
  }
  auto lookup = [&](int id, const std::string& where) {
    auto it = pos.find(id);
    if (it == pos.end())
      throw Error(ErrorCode::InvalidCase, where + ": unknown bus " + std::to_string(id));
    return it->second;
  };
  const auto& branches = field<json>(j, "branches", "case");
  for (size_t i = 0; i < branches.size(); ++i) {
    const auto& o = branches[i];
    const std::string where = "branches[" + std::to_string(i) + "]";
    Branch br;
    br.id = field_or(o, "id", static_cast<int>(i) + 1, where);
    br.from = lookup(field<int>(o, "from", where), where);
    br.to = lookup(field<int>(o, "to", where), where);
    br.r = field_or(o, "r", 0.0, where);
    br.x = field<double>(o, "x", where);
    br.b_shunt = field_or(o, "b", 0.0, where);
    br.tap = field_or(o, "tap", 1.0, where);
    br.shift_deg = field_or(o, "shift_deg", 0.0, where);
    br.f_lim1 = field<double>(o, "f_lim1", where);
    br.f_lim2 = field_or(o, "f_lim2", 1.5 * br.f_lim1, where);
    br.hidden_failure_prob = field_or(o, "hidden_failure_prob", 0.01, where);
    const double kv_f = grid.buses[br.from].base_kv, kv_t = grid.buses[br.to].base_kv;
    br.transformer = field_or(o, "transformer",
                              br.tap != 1.0 || (kv_f > 0 && kv_t > 0 && kv_f != kv_t), where);
    grid.branches.push_back(br);
  }
  if (j.contains("generators")) {
    const auto& gens = j["generators"];
    for (size_t i = 0; i < gens.size(); ++i) {
      const auto& o = gens[i];
      const std::string where = "generators[" + std::to_string(i) + "]";
      Generator g;
      g.id = field_or(o, "id", static_cast<int>(i) + 1, where);
      g.bus = lookup(field<int>(o, "bus", where), where);
      g.p = field_or(o, "p", 0.0, where);
      g.q = field_or(o, "q", 0.0, where);
      g.p_min = field_or(o, "p_min", 0.0, where);
      g.p_max = field<double>(o, "p_max", where);
      g.q_min = field_or(o, "q_min", -9999.0, where);
      g.q_max = field_or(o, "q_max", 9999.0, where);
      g.v_set = field_or(o, "v_set", 1.0, where);
      g.slack_coeff = field_or(o, "slack_coeff", -1.0, where);
      grid.generators.push_back(g);
    }
  }
  if (j.contains("loads")) {
    const auto& loads = j["loads"];
    for (size_t i = 0; i < loads.size(); ++i) {
      const auto& o = loads[i];
      const std::string where = "loads[" + std::to_string(i) + "]";
      Load d;
      d.id = field_or(o, "id", static_cast<int>(i) + 1, where);
      d.bus = lookup(field<int>(o, "bus", where), where);
      d.p = field<double>(o, "p", where);
      d.q = field_or(o, "q", 0.0, where);
      grid.loads.push_back(d);
    }
  }
  validate_case(grid);
  return grid;
}

json case_to_json(const GridCase& grid) {
  json j;
  j["name"] = grid.name;
  j["base_mva"] = grid.base_mva;
  j["buses"] = json::array();
  for (const auto& b : grid.buses) {
    j["buses"].push_back({{"id", b.id},
                          {"type", bus_type_name(b.type)},
                          {"gs", b.gs},
                          {"bs", b.bs},
                          {"base_kv", b.base_kv},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max},
                          {"area", b.area}});
  }
  j["branches"] = json::array();
  for (const auto& br : grid.branches) {
    j["branches"].push_back({{"id", br.id},
                             {"from", grid.buses[br.from].id},
                             {"to", grid.buses[br.to].id},
                             {"r", br.r},
                             {"x", br.x},
                             {"b", br.b_shunt},
                             {"tap", br.tap},
                             {"shift_deg", br.shift_deg},
                             {"f_lim1", br.f_lim1},
                             {"f_lim2", br.f_lim2},
                             {"hidden_failure_prob", br.hidden_failure_prob},
                             {"transformer", br.transformer}});
  }
  j["generators"] = json::array();
  for (const auto& g : grid.generators) {
    j["generators"].push_back({{"id", g.id},
                               {"bus", grid.buses[g.bus].id},
                               {"p", g.p},
                               {"q", g.q},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"q_min", g.q_min},
                               {"q_max", g.q_max},
                               {"v_set", g.v_set},
                               {"slack_coeff", g.slack_coeff}});
  }
  j["loads"] = json::array();
  for (const auto& d : grid.loads)
    j["loads"].push_back({{"id", d.id}, {"bus", grid.buses[d.bus].id}, {"p", d.p}, {"q", d.q}});
  return j;
}

GridCase load_case(const std::filesystem::path& path, CaseFormat format,
                   const MatpowerOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open case file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (format == CaseFormat::Auto)
    format = path.extension() == ".m" ? CaseFormat::Matpower : CaseFormat::Json;
  if (format == CaseFormat::Matpower) return parse_matpower(text, opts);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return case_from_json(j);
}

void save_case_json(const GridCase& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << case_to_json(grid).dump(1) << '\n';
}

std::string case_hash(const GridCase& grid) {
  const std::string text = case_to_json(grid).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GridCase scale_case(const GridCase& grid, const ScaleOptions& opts) {
  if (!(opts.load_factor > 0.0) || !(opts.limit_factor > 0.0))
    throw Error(ErrorCode::InvalidArgument, "scale factors must be positive");
  GridCase out = grid;
  double load_mult = opts.load_factor;
  if (opts.base_total_load_mw) {
    const double total = grid.total_load_mw();
    if (!(total > 0.0) || !(*opts.base_total_load_mw > 0.0))
      throw Error(ErrorCode::InvalidArgument, "base_total_load_mw needs positive totals");
    load_mult *= *opts.base_total_load_mw / total;
  }
  for (auto& d : out.loads) {
    d.p *= load_mult;
    d.q *= load_mult;
  }
  for (auto& br : out.branches) {
    if (opts.uniform_limits) {
      br.f_lim1 = br.transformer ? opts.uniform_limits->xfmr_mw : opts.uniform_limits->line_mw;
      br.f_lim2 = opts.f_lim2_ratio * br.f_lim1;
    }
    br.f_lim1 *= opts.limit_factor;
    br.f_lim2 *= opts.limit_factor;
    if (opts.hidden_failure_prob) br.hidden_failure_prob = *opts.hidden_failure_prob;
  }
  for (auto& b : out.buses) {
    if (opts.v_min) b.v_min = *opts.v_min;
    if (opts.v_max) b.v_max = *opts.v_max;
  }
  validate_case(out);
  return out;
}

const Island& Topology::island(int id) const {
  for (const auto& isl : islands)
    if (isl.id == id) return isl;
  throw Error(ErrorCode::InvalidArgument, "no active island " + std::to_string(id));
}

bool Topology::is_descendant_or_self(int id, int ancestor) const {
  while (id >= 0) {
    if (id == ancestor) return true;
    id = parent.at(id);
  }
  return false;
}

Topology compute_islands(const GridCase& grid, std::span<const char> in_service,
                         const Topology* parent) {
  const int nb = grid.num_buses();
  if (static_cast<int>(in_service.size()) != grid.num_branches())
    throw Error(ErrorCode::InvalidArgument, "branch mask length mismatch");

  // Union-find over in-service branches.
  std::vector<int> root(nb);
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](int v) {
    while (root[v] != v) v = root[v] = root[root[v]];
    return v;
  };
  for (int l = 0; l < grid.num_branches(); ++l) {
    if (!in_service[l]) continue;
    int a = find(grid.branches[l].from), b = find(grid.branches[l].to);
    if (a != b) root[std::max(a, b)] = std::min(a, b);
  }
  // Components ordered by their smallest bus position.
  std::vector<std::vector<int>> comps;
  std::vector<int> comp_of_root(nb, -1);
  for (int v = 0; v < nb; ++v) {
    int r = find(v);
    if (comp_of_root[r] < 0) {
      comp_of_root[r] = static_cast<int>(comps.size());
      comps.emplace_back();
    }
    comps[comp_of_root[r]].push_back(v);
  }

  Topology topo;
  topo.in_service.assign(in_service.begin(), in_service.end());
  topo.island_of_bus.assign(nb, -1);
  if (parent) topo.parent = parent->parent;

  for (auto& buses : comps) {
    Island isl;
    if (!parent) {
      isl.id = topo.next_id();
      topo.parent.push_back(-1);
    } else {
      const int pid = parent->island_of_bus[buses.front()];
      const Island& p = parent->island(pid);
      for (int v : buses)
        if (parent->island_of_bus[v] != pid)
          throw Error(ErrorCode::InvalidArgument, "component spans two parent islands");
      if (p.buses.size() == buses.size()) {
        isl.id = pid;
      } else {
        isl.id = topo.next_id();
        topo.parent.push_back(pid);
      }
    }
    isl.buses = std::move(buses);
    for (int v : isl.buses) topo.island_of_bus[v] = isl.id;
    topo.islands.push_back(std::move(isl));
  }
  std::sort(topo.islands.begin(), topo.islands.end(),
            [](const Island& a, const Island& b) { return a.id < b.id; });
  return topo;
}

}  // namespace gridcfc
