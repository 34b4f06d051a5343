#pragma once

// Metric records (one per task x run), their CSV/JSON serialization, seed
// aggregation (mean and n-1 standard deviation), best-configuration selection
// and table rendering.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "kae/error.hpp"
#include "kae/layers.hpp"

namespace kae {

enum class Task { Reconstruction, Retrieval, Classification, DenoisingGaussian, DenoisingSaltPepper };

inline constexpr Task kAllTasks[] = {Task::Reconstruction, Task::Retrieval, Task::Classification,
                                     Task::DenoisingGaussian, Task::DenoisingSaltPepper};

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::Reconstruction: return "reconstruction";
    case Task::Retrieval: return "retrieval";
    case Task::Classification: return "classification";
    case Task::DenoisingGaussian: return "denoising-gaussian";
    case Task::DenoisingSaltPepper: return "denoising-saltpepper";
  }
  return "?";
}

inline std::optional<Task> parse_task(std::string_view s) {
  for (Task t : kAllTasks)
    if (s == to_string(t)) return t;
  return std::nullopt;
}

/// MSE-type tasks are minimized; recall and accuracy are maximized.
inline bool lower_is_better(Task t) { return t != Task::Retrieval && t != Task::Classification; }

struct MetricRecord {
  Task task = Task::Reconstruction;
  std::size_t recall_n = 0;  // retrieval only
  std::string dataset;
  std::size_t d_latent = 0;
  std::string family;  // canonical layer kind name
  unsigned p = 0;      // polynomial order, 0 for other families
  double lr = 0.0;
  double wd = 0.0;
  std::uint64_t seed = 0;
  double value = 0.0;

  /// "retrieval@10" for retrieval, plain task name otherwise.
  std::string task_label() const {
    return task == Task::Retrieval ? "retrieval@" + std::to_string(recall_n) : std::string(to_string(task));
  }

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// Display name of a family as used in result tables.
inline std::string family_display(std::string_view family, unsigned p) {
  if (family == "affine") return "AE";
  if (family == "bspline") return "KAN";
  if (family == "fourier") return "FourierKAN";
  if (family == "wavelet") return "WavKAN";
  if (family == "polynomial") return "KAE (p=" + std::to_string(p) + ")";
  return std::string(family);
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, std::size_t line, std::string_view field) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": bad number '" + std::string(s) + "' in field " +
                                      std::string(field));
  return v;
}

template <typename Int>
Int parse_int(std::string_view s, std::size_t line, std::string_view field) {
  Int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": bad integer '" + std::string(s) +
                                      "' in field " + std::string(field));
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

inline void parse_task_label(std::string_view label, MetricRecord& r, std::size_t line) {
  if (label.starts_with("retrieval@")) {
    r.task = Task::Retrieval;
    r.recall_n = parse_int<std::size_t>(label.substr(10), line, "task");
    return;
  }
  const auto t = parse_task(label);
  if (!t || *t == Task::Retrieval)
    throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": unknown task '" + std::string(label) + "'");
  r.task = *t;
}

}  // namespace detail

inline constexpr std::string_view kRecordsHeader = "task,dataset,d_latent,family,p,lr,wd,seed,value";

inline std::string record_csv_line(const MetricRecord& r) {
  return r.task_label() + "," + r.dataset + "," + std::to_string(r.d_latent) + "," + r.family + "," +
         std::to_string(r.p) + "," + detail::format_double(r.lr) + "," + detail::format_double(r.wd) + "," +
         std::to_string(r.seed) + "," + detail::format_double(r.value);
}

inline std::string records_to_csv(const std::vector<MetricRecord>& records) {
  std::string out(kRecordsHeader);
  out += '\n';
  for (const auto& r : records) out += record_csv_line(r) + '\n';
  return out;
}

inline std::vector<MetricRecord> records_from_csv(std::string_view text) {
  std::vector<MetricRecord> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (auto line : detail::split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kRecordsHeader)
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected header '" +
                                          std::string(kRecordsHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 9)
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 9 fields, got " +
                                        std::to_string(f.size()));
    MetricRecord r;
    detail::parse_task_label(f[0], r, line_no);
    r.dataset = std::string(f[1]);
    r.d_latent = detail::parse_int<std::size_t>(f[2], line_no, "d_latent");
    if (!parse_layer_kind(f[3]))
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unknown family '" + std::string(f[3]) + "'");
    r.family = std::string(f[3]);
    r.p = detail::parse_int<unsigned>(f[4], line_no, "p");
    r.lr = detail::parse_double(f[5], line_no, "lr");
    r.wd = detail::parse_double(f[6], line_no, "wd");
    r.seed = detail::parse_int<std::uint64_t>(f[7], line_no, "seed");
    r.value = detail::parse_double(f[8], line_no, "value");
    if (!std::isfinite(r.value))
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": non-finite value");
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json record_to_json(const MetricRecord& r) {
  return {{"task", r.task_label()}, {"dataset", r.dataset}, {"d_latent", r.d_latent}, {"family", r.family},
          {"p", r.p},            {"lr", r.lr},           {"wd", r.wd},             {"seed", r.seed},
          {"value", r.value}};
}

inline MetricRecord record_from_json(const nlohmann::json& j, std::size_t index) {
  try {
    MetricRecord r;
    detail::parse_task_label(j.at("task").get<std::string>(), r, index + 1);
    r.dataset = j.at("dataset").get<std::string>();
    r.d_latent = j.at("d_latent").get<std::size_t>();
    r.family = j.at("family").get<std::string>();
    r.p = j.at("p").get<unsigned>();
    r.lr = j.at("lr").get<double>();
    r.wd = j.at("wd").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.value = j.at("value").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "record " + std::to_string(index + 1) + ": " + e.what());
  }
}

// ---- aggregation -------------------------------------------------------------------

struct Aggregate {
  std::string task_label;
  Task task = Task::Reconstruction;
  std::size_t recall_n = 0;
  std::string dataset;
  std::size_t d_latent = 0;
  std::string family;
  unsigned p = 0;
  double lr = 0.0;
  double wd = 0.0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single seed
  std::size_t n_seeds = 0;
};

namespace detail {

inline int family_rank(std::string_view f) {
  if (f == "affine") return 0;
  if (f == "bspline") return 1;
  if (f == "fourier") return 2;
  if (f == "wavelet") return 3;
  if (f == "polynomial") return 4;
  return 5;
}

inline auto aggregate_key(const MetricRecord& r) {
  return std::make_tuple(static_cast<int>(r.task), r.recall_n, r.dataset, r.d_latent, family_rank(r.family), r.family,
                         r.p, r.lr, r.wd);
}

}  // namespace detail

/// Mean and sample standard deviation over seeds for every
/// (task, dataset, d_latent, family, p, lr, wd). Output order is fixed by the key.
inline std::vector<Aggregate> aggregate(const std::vector<MetricRecord>& records) {
  using Key = decltype(detail::aggregate_key(records.front()));
  std::map<Key, std::vector<const MetricRecord*>> groups;
  for (const auto& r : records) groups[detail::aggregate_key(r)].push_back(&r);
  std::vector<Aggregate> out;
  for (const auto& [key, rs] : groups) {
    const auto& r0 = *rs.front();
    Aggregate a{r0.task_label(), r0.task, r0.recall_n, r0.dataset, r0.d_latent, r0.family,
                r0.p,           r0.lr,   r0.wd,       0.0,        0.0,         rs.size()};
    double sum = 0.0;
    for (const auto* r : rs) sum += r->value;
    a.mean = sum / static_cast<double>(rs.size());
    if (rs.size() > 1) {
      double ss = 0.0;
      for (const auto* r : rs) ss += (r->value - a.mean) * (r->value - a.mean);
      a.std = std::sqrt(ss / static_cast<double>(rs.size() - 1));
    }
    out.push_back(std::move(a));
  }
  return out;
}

enum class SelectionMode { PerTask, ReconstructionOnly };

inline std::optional<SelectionMode> parse_selection(std::string_view s) {
  if (s == "per-task") return SelectionMode::PerTask;
  if (s == "reconstruction") return SelectionMode::ReconstructionOnly;
  return std::nullopt;
}

/// For every (task label, dataset, d_latent, family, p) keep the grid point
/// (lr, wd) with the best seed-averaged value. PerTask judges each task by its
/// own metric; ReconstructionOnly picks the grid point with the lowest
/// reconstruction error and reports every task at that point.
inline std::vector<Aggregate> select_best(const std::vector<Aggregate>& aggs,
                                          SelectionMode mode = SelectionMode::PerTask) {
  auto group_key = [](const Aggregate& a) {
    return std::make_tuple(static_cast<int>(a.task), a.recall_n, a.task_label, a.dataset, a.d_latent,
                           detail::family_rank(a.family), a.family, a.p);
  };
  auto better = [](const Aggregate& a, const Aggregate& b) {
    return lower_is_better(a.task) ? a.mean < b.mean : a.mean > b.mean;
  };

  std::map<std::tuple<std::string, std::size_t, std::string, unsigned>, std::pair<double, double>> recon_best;
  if (mode == SelectionMode::ReconstructionOnly) {
    std::map<std::tuple<std::string, std::size_t, std::string, unsigned>, const Aggregate*> best;
    for (const auto& a : aggs) {
      if (a.task != Task::Reconstruction) continue;
      auto k = std::make_tuple(a.dataset, a.d_latent, a.family, a.p);
      auto it = best.find(k);
      if (it == best.end() || a.mean < it->second->mean) best[k] = &a;
    }
    for (const auto& [k, a] : best) recon_best[k] = {a->lr, a->wd};
  }

  std::map<decltype(group_key(aggs.front())), Aggregate> chosen;
  for (const auto& a : aggs) {
    if (mode == SelectionMode::ReconstructionOnly) {
      auto it = recon_best.find(std::make_tuple(a.dataset, a.d_latent, a.family, a.p));
      if (it != recon_best.end() && (a.lr != it->second.first || a.wd != it->second.second)) continue;
    }
    auto k = group_key(a);
    auto it = chosen.find(k);
    if (it == chosen.end() || (mode == SelectionMode::PerTask && better(a, it->second))) chosen[k] = a;
  }
  std::vector<Aggregate> out;
  for (auto& [k, a] : chosen) out.push_back(std::move(a));
  return out;
}

inline constexpr std::string_view kAggregateHeader = "task,dataset,d_latent,family,p,lr,wd,mean,std,n_seeds";

inline std::string aggregates_to_csv(const std::vector<Aggregate>& aggs) {
  std::string out(kAggregateHeader);
  out += '\n';
  for (const auto& a : aggs)
    out += a.task_label + "," + a.dataset + "," + std::to_string(a.d_latent) + "," + a.family + "," +
           std::to_string(a.p) + "," + detail::format_double(a.lr) + "," + detail::format_double(a.wd) + "," +
           detail::format_double(a.mean) + "," + detail::format_double(a.std) + "," + std::to_string(a.n_seeds) + "\n";
  return out;
}

inline nlohmann::json aggregate_to_json(const Aggregate& a) {
  return {{"task", a.task_label}, {"dataset", a.dataset}, {"d_latent", a.d_latent}, {"family", a.family},
          {"p", a.p},             {"lr", a.lr},           {"wd", a.wd},             {"mean", a.mean},
          {"std", a.std},         {"n_seeds", a.n_seeds}};
}

/// Improvement of the best KAE row over AE for one table column; positive
/// means KAE is better (AE - KAE for MSE tasks, KAE - AE otherwise).
struct Improvement {
  std::string task_label;
  std::string dataset;
  std::size_t d_latent = 0;
  double value = 0.0;
};

inline std::vector<Improvement> improvements(const std::vector<Aggregate>& selected) {
  std::map<std::tuple<std::string, std::string, std::size_t>, std::pair<const Aggregate*, const Aggregate*>> cols;
  for (const auto& a : selected) {
    auto& [ae, kae] = cols[{a.task_label, a.dataset, a.d_latent}];
    if (a.family == "affine") ae = &a;
    if (a.family == "polynomial") {
      const bool take = !kae || (lower_is_better(a.task) ? a.mean < kae->mean : a.mean > kae->mean);
      if (take) kae = &a;
    }
  }
  std::vector<Improvement> out;
  for (const auto& [k, pr] : cols) {
    if (!pr.first || !pr.second) continue;
    const double d = lower_is_better(pr.first->task) ? pr.first->mean - pr.second->mean
                                                     : pr.second->mean - pr.first->mean;
    out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), d});
  }
  return out;
}

inline nlohmann::json report_to_json(const std::vector<MetricRecord>& records,
                                     SelectionMode mode = SelectionMode::PerTask) {
  const auto aggs = aggregate(records);
  const auto sel = select_best(aggs, mode);
  nlohmann::json j;
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) j["records"].push_back(record_to_json(r));
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : aggs) j["aggregates"].push_back(aggregate_to_json(a));
  j["selected"] = nlohmann::json::array();
  for (const auto& a : sel) j["selected"].push_back(aggregate_to_json(a));
  j["improvement"] = nlohmann::json::array();
  for (const auto& i : improvements(sel))
    j["improvement"].push_back({{"task", i.task_label}, {"dataset", i.dataset}, {"d_latent", i.d_latent},
                                {"value", i.value}});
  return j;
}

/// One markdown table per task label: rows are families, columns are
/// (dataset, d_latent); cells are "mean ± std" at the selected grid point and
/// the best cell of each column is bold. A final "Improve" row gives the best
/// KAE's gain over AE.
inline std::string report_to_markdown(const std::vector<MetricRecord>& records,
                                      SelectionMode mode = SelectionMode::PerTask) {
  if (records.empty()) return "| task | dataset | d_latent | family | mean | std | n_seeds |\n|---|---|---|---|---|---|---|\n";
  const auto sel = select_best(aggregate(records), mode);
  const auto imp = improvements(sel);

  auto fmt3 = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", v);
    return std::string(b);
  };

  std::string out;
  std::vector<std::string> labels;
  for (const auto& a : sel)
    if (std::find(labels.begin(), labels.end(), a.task_label) == labels.end()) labels.push_back(a.task_label);

  for (const auto& label : labels) {
    std::vector<std::pair<std::string, std::size_t>> cols;
    std::vector<std::tuple<int, unsigned, std::string>> rows;  // rank, p, family
    for (const auto& a : sel) {
      if (a.task_label != label) continue;
      std::pair<std::string, std::size_t> c{a.dataset, a.d_latent};
      if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
      std::tuple<int, unsigned, std::string> r{detail::family_rank(a.family), a.p, a.family};
      if (std::find(rows.begin(), rows.end(), r) == rows.end()) rows.push_back(r);
    }
    std::sort(rows.begin(), rows.end());

    out += "### " + label + "\n\n| Model |";
    for (const auto& [ds, d] : cols) out += " " + ds + " (" + std::to_string(d) + ") |";
    out += "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) out += "---|";
    out += "\n";

    auto find = [&](const std::string& fam, unsigned p, const std::pair<std::string, std::size_t>& c)
        -> const Aggregate* {
      for (const auto& a : sel)
        if (a.task_label == label && a.family == fam && a.p == p && a.dataset == c.first && a.d_latent == c.second)
          return &a;
      return nullptr;
    };
    for (const auto& [rank, p, fam] : rows) {
      out += "| " + family_display(fam, p) + " |";
      for (const auto& c : cols) {
        const auto* a = find(fam, p, c);
        if (!a) {
          out += " - |";
          continue;
        }
        bool best = true;
        for (const auto& [r2, p2, f2] : rows) {
          const auto* b = find(f2, p2, c);
          if (b && (lower_is_better(a->task) ? b->mean < a->mean : b->mean > a->mean)) best = false;
        }
        const std::string cell = fmt3(a->mean) + " ± " + fmt3(a->std);
        out += best ? " **" + cell + "** |" : " " + cell + " |";
      }
      out += "\n";
    }
    bool any = false;
    std::string row = "| Improve |";
    for (const auto& c : cols) {
      auto it = std::find_if(imp.begin(), imp.end(), [&](const Improvement& i) {
        return i.task_label == label && i.dataset == c.first && i.d_latent == c.second;
      });
      if (it == imp.end()) {
        row += " - |";
      } else {
        row += " " + fmt3(it->value) + " |";
        any = true;
      }
    }
    if (any) out += row + "\n";
    out += "\n";
  }
  return out;
}

// ---- files ----------------------------------------------------------------------------

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, std::string_view text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + p.string() + " for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error(ErrorKind::Io, "write failed for " + p.string());
}

/// Records from a records CSV, a JSON array of records, or a JSON report
/// object with a "records" member.
inline std::vector<MetricRecord> read_records(const std::filesystem::path& p) {
  const auto text = read_text(p);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Parse, p.string() + ": " + e.what());
    }
    const auto& arr = j.is_object() ? j.at("records") : j;
    std::vector<MetricRecord> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(record_from_json(arr[i], i));
    return out;
  }
  try {
    return records_from_csv(text);
  } catch (const Error& e) {
    throw Error(e.kind(), p.string() + ": " + e.what());
  }
}

}  // namespace kae
