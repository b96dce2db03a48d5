#include "gridcfc/interaction.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridcfc/error.hpp"

namespace gridcfc {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  return out;
}

void check_written(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace

double InteractionMatrix::max_weight() const {
  double m = 0.0;
  for (double v : w) m = std::max(m, v);
  return m;
}

bool cause_effect(const CascadeRecord& record, const OutageEvent& cause,
                  const OutageEvent& effect) {
  return effect.stage == cause.stage + 1 &&
         record.is_descendant_or_self(effect.island, cause.island);
}

double downstream_loss(const CascadeRecord& record, const OutageEvent& effect,
                       bool include_own_stage) {
  double sum = 0.0;
  for (const auto& l : record.losses) {
    if (l.stage < effect.stage || (!include_own_stage && l.stage == effect.stage)) continue;
    if (record.is_descendant_or_self(l.island, effect.island)) sum += l.mw;
  }
  return sum;
}

int co_failures(const CascadeRecord& record, const OutageEvent& event) {
  int n = 0;
  for (const auto& e : record.events) n += e.stage == event.stage && e.island == event.island;
  return std::max(n, 1);
}

double severity(const CascadeRecord& record, const OutageEvent& cause, const OutageEvent& effect,
                const InteractionParams& params, double served_mw) {
  if (!cause_effect(record, cause, effect)) return 0.0;
  const double loss = downstream_loss(record, effect, params.loss_includes_own_stage);
  return params.k1 * std::exp(params.k2 * loss / served_mw) /
         (co_failures(record, cause) * co_failures(record, effect));
}

InteractionAccumulator::InteractionAccumulator(int n_branches, double served_mw,
                                               std::string case_hash, InteractionParams params)
    : n_(n_branches),
      served_mw_(served_mw),
      case_hash_(std::move(case_hash)),
      params_(params),
      sum_(static_cast<size_t>(n_branches) * n_branches, 0.0) {
  std::string msg;
  if (n_branches < 1) msg += "\n  branch count must be positive";
  if (!(served_mw > 0.0)) msg += "\n  served load must be positive";
  if (!(params.k1 >= 0.0)) msg += "\n  k1 must be nonnegative";
  if (!(params.k2 >= 0.0)) msg += "\n  k2 must be nonnegative";
  if (!msg.empty()) throw Error(ErrorCode::InvalidArgument, "interaction parameters:" + msg);
}

void InteractionAccumulator::add(const CascadeRecord& record) {
  const auto& ev = record.events;
  for (const auto& e : ev)
    if (e.branch < 0 || e.branch >= n_)
      throw Error(ErrorCode::InvalidArgument,
                  "record " + std::to_string(record.index) + " names branch index " +
                      std::to_string(e.branch) + " outside the case");
  for (const auto& cause : ev)
    for (const auto& effect : ev) {
      if (cause.branch == effect.branch) continue;
      const double m = severity(record, cause, effect, params_, served_mw_);
      if (m > 0.0) sum_[static_cast<size_t>(cause.branch) * n_ + effect.branch] += m;
    }
  ++n_samples_;
}

void InteractionAccumulator::add(const BatchResult& batch) {
  if (!case_hash_.empty() && batch.case_hash != case_hash_)
    throw Error(ErrorCode::Mismatch, "batch case hash " + batch.case_hash +
                                         " differs from the accumulated case " + case_hash_);
  for (const auto& r : batch.records) add(r);
}

void InteractionAccumulator::merge(const InteractionAccumulator& other) {
  if (other.n_ != n_ || other.case_hash_ != case_hash_)
    throw Error(ErrorCode::Mismatch, "cannot merge interaction sums of different cases");
  for (size_t k = 0; k < sum_.size(); ++k) sum_[k] += other.sum_[k];
  n_samples_ += other.n_samples_;
}

InteractionMatrix InteractionAccumulator::result() const {
  if (n_samples_ == 0) throw Error(ErrorCode::Empty, "no samples");
  InteractionMatrix m;
  m.n_branches = n_;
  m.n_samples = n_samples_;
  m.params = params_;
  m.served_mw = served_mw_;
  m.case_hash = case_hash_;
  m.w.resize(sum_.size());
  const double n = static_cast<double>(n_samples_);
  for (size_t k = 0; k < sum_.size(); ++k) m.w[k] = sum_[k] / n;
  return m;
}

InteractionMatrix accumulate(const BatchResult& batch, int n_branches,
                             const InteractionParams& params) {
  InteractionAccumulator acc(n_branches, batch.served_mw, batch.case_hash, params);
  acc.add(batch);
  return acc.result();
}

void write_edge_csv(const InteractionMatrix& w, const std::filesystem::path& path,
                    double threshold) {
  auto out = open_out(path);
  out << "from,to,weight\n";
  for (int i = 0; i < w.n_branches; ++i)
    for (int j = 0; j < w.n_branches; ++j)
      if (i != j && w.at(i, j) > threshold)
        out << i + 1 << ',' << j + 1 << ',' << fmt(w.at(i, j)) << '\n';
  check_written(out, path);
}

void write_gexf(const InteractionMatrix& w, const GridCase& grid,
                const std::filesystem::path& path, double threshold,
                const std::vector<double>* node_score) {
  if (grid.num_branches() != w.n_branches)
    throw Error(ErrorCode::Mismatch, "matrix size does not match the case branch count");
  if (node_score && static_cast<int>(node_score->size()) != w.n_branches)
    throw Error(ErrorCode::Mismatch, "node score size does not match the branch count");
  auto out = open_out(path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<gexf xmlns=\"http://gexf.net/1.3\" version=\"1.3\">\n"
      << "  <graph mode=\"static\" defaultedgetype=\"directed\">\n"
      << "    <attributes class=\"node\">\n"
      << "      <attribute id=\"0\" title=\"from_bus\" type=\"integer\"/>\n"
      << "      <attribute id=\"1\" title=\"to_bus\" type=\"integer\"/>\n";
  if (node_score) out << "      <attribute id=\"2\" title=\"K\" type=\"double\"/>\n";
  out << "    </attributes>\n    <nodes>\n";
  for (int i = 0; i < w.n_branches; ++i) {
    const auto& br = grid.branches[i];
    out << "      <node id=\"" << i + 1 << "\" label=\"" << xml_escape(grid.branch_label(i))
        << "\">\n        <attvalues>\n"
        << "          <attvalue for=\"0\" value=\"" << grid.buses[br.from].id << "\"/>\n"
        << "          <attvalue for=\"1\" value=\"" << grid.buses[br.to].id << "\"/>\n";
    if (node_score)
      out << "          <attvalue for=\"2\" value=\"" << fmt((*node_score)[i]) << "\"/>\n";
    out << "        </attvalues>\n      </node>\n";
  }
  out << "    </nodes>\n    <edges>\n";
  int edge = 0;
  for (int i = 0; i < w.n_branches; ++i)
    for (int j = 0; j < w.n_branches; ++j)
      if (i != j && w.at(i, j) > threshold)
        out << "      <edge id=\"" << edge++ << "\" source=\"" << i + 1 << "\" target=\"" << j + 1
            << "\" weight=\"" << fmt(w.at(i, j)) << "\"/>\n";
  out << "    </edges>\n  </graph>\n</gexf>\n";
  check_written(out, path);
}

void write_matrix(const InteractionMatrix& w, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "n_branches,n_samples,k1,k2,served_mw,loss_includes_own_stage,case_hash\n"
      << w.n_branches << ',' << w.n_samples << ',' << fmt(w.params.k1) << ','
      << fmt(w.params.k2) << ',' << fmt(w.served_mw) << ','
      << (w.params.loss_includes_own_stage ? 1 : 0) << ',' << w.case_hash << '\n';
  for (int i = 0; i < w.n_branches; ++i) {
    for (int j = 0; j < w.n_branches; ++j) out << (j ? "," : "") << fmt(w.at(i, j));
    out << '\n';
  }
  check_written(out, path);
}

InteractionMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open matrix file '" + path.string() + "'");
  auto fail = [&](int line, const std::string& what) {
    throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line) + ": " + what);
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  auto number = [&](const std::string& s, int line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(line, "bad number '" + s + "'");
    return v;
  };

  std::string line;
  if (!std::getline(in, line) || line.rfind("n_branches,", 0) != 0) fail(1, "missing header");
  if (!std::getline(in, line)) fail(2, "missing metadata");
  auto meta = split(line);
  if (meta.size() != 7) fail(2, "expected 7 metadata fields");
  InteractionMatrix m;
  m.n_branches = static_cast<int>(number(meta[0], 2));
  m.n_samples = static_cast<std::uint64_t>(number(meta[1], 2));
  m.params.k1 = number(meta[2], 2);
  m.params.k2 = number(meta[3], 2);
  m.served_mw = number(meta[4], 2);
  m.params.loss_includes_own_stage = meta[5] == "1";
  m.case_hash = meta[6];
  if (m.n_branches < 1) fail(2, "branch count must be positive");
  m.w.reserve(static_cast<size_t>(m.n_branches) * m.n_branches);
  for (int i = 0; i < m.n_branches; ++i) {
    if (!std::getline(in, line)) fail(i + 3, "missing matrix row");
    auto cells = split(line);
    if (static_cast<int>(cells.size()) != m.n_branches)
      fail(i + 3, "expected " + std::to_string(m.n_branches) + " columns");
    for (const auto& c : cells) m.w.push_back(number(c, i + 3));
  }
  return m;
}

}  // namespace gridcfc
