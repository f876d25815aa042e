#include "edgeprune/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "edgeprune/error.hpp"
#include "edgeprune/model.hpp"
#include "edgeprune/units.hpp"

namespace edgeprune {

namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  return std::string(buf, end);
}

std::string ms(double seconds) { return num(seconds * 1e3); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string record_label(const PrunedModelRecord& r) {
  switch (r.lineage.kind) {
    case LineageKind::Original: return "original";
    case LineageKind::Step1: return "step1";
    case LineageKind::Step2:
      return "step2:L" + std::to_string(r.lineage.layer) + "#" + std::to_string(r.lineage.iteration);
  }
  return "?";
}

const ModelProfile& require_profile(const Catalog& catalog, int id) {
  const ModelProfile* p = catalog.profile(id);
  if (p == nullptr) throw InvalidInput("record " + std::to_string(id) + " has no profile");
  return *p;
}

std::string partition_label(const ModelProfile& p, std::size_t partition) {
  if (partition == 0) return "input";
  return p.layers[partition - 1].name;
}

}  // namespace

std::string to_csv(const Table& table, const std::string& config_digest) {
  std::ostringstream out;
  out << "# config_digest=" << config_digest << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << csv_escape(table.columns[i]);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_escape(row[i]);
    out << '\n';
  }
  return out.str();
}

std::string to_markdown(const Table& table, const std::string& config_digest) {
  std::ostringstream out;
  out << "### " << table.title << "\n\n";
  out << "config digest `" << config_digest << "`\n\n";
  out << '|';
  for (const auto& c : table.columns) out << ' ' << c << " |";
  out << "\n|";
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << " --- |";
  out << '\n';
  for (const auto& row : table.rows) {
    out << '|';
    for (const auto& cell : row) out << ' ' << cell << " |";
    out << '\n';
  }
  out << '\n';
  return out.str();
}

Table layer_table(const Catalog& catalog, int record_id) {
  const ModelProfile& p = require_profile(catalog, record_id);
  Table t;
  t.name = "layers_" + std::to_string(record_id);
  t.title = "Per-layer output size and cumulative latency, record " + std::to_string(record_id) +
            " (" + record_label(catalog.find(record_id)) + ")";
  t.columns = {"index", "layer", "kind", "elements", "bytes", "latency_ms", "cumulative_ms"};
  t.rows.push_back({"0", "input", "input", std::to_string(p.input_elements),
                    std::to_string(p.input_bytes), "0", "0"});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const LayerProfile& l = p.layers[i];
    t.rows.push_back({std::to_string(i + 1), l.name, l.kind, std::to_string(l.elements),
                      std::to_string(l.bytes), ms(l.latency_s), ms(p.cumulative[i])});
  }
  return t;
}

Table breakdown_table(const Catalog& catalog, const std::vector<int>& record_ids,
                      const SystemConfig& cfg) {
  Table t;
  t.name = "breakdown";
  t.title = "Latency breakdown per partition point (gamma " + num(cfg.gamma) + ", R " +
            num(to_mbps(cfg.upload_rate)) + " Mbps)";
  t.columns = {"record", "model", "partition", "after", "bytes", "mobile_ms", "transmission_ms",
               "server_ms", "total_ms"};
  for (int id : record_ids) {
    const PrunedModelRecord& r = catalog.find(id);
    PlanCandidate c{id, r.accuracy, &require_profile(catalog, id), std::nullopt};
    for (std::size_t p = 0; p <= c.profile->layer_count(); ++p) {
      const PartitionPlan plan = evaluate_plan(c, p, cfg);
      t.rows.push_back({std::to_string(id), record_label(r), std::to_string(p),
                        partition_label(*c.profile, p), std::to_string(plan.transmitted_bytes),
                        ms(plan.mobile_s), ms(plan.transmission_s), ms(plan.server_s),
                        ms(plan.total_s)});
    }
  }
  return t;
}

namespace {

std::vector<std::string> plan_cells(const PartitionPlan& plan) {
  if (!plan.feasible) return {"-", "-", "-", "-", "-", "-", "-"};
  return {std::to_string(plan.record_id), std::to_string(plan.partition),
          std::to_string(plan.transmitted_bytes), ms(plan.mobile_s), ms(plan.transmission_s),
          ms(plan.server_s), ms(plan.total_s)};
}

const std::vector<std::string> kPlanColumns = {"record", "partition", "bytes", "mobile_ms",
                                               "transmission_ms", "server_ms", "total_ms"};

}  // namespace

Table rate_sweep_table(const std::vector<PlanCandidate>& candidates, const std::vector<double>& rates,
                       const SystemConfig& base) {
  Table t;
  t.name = "sweep_rate";
  t.title = "Selected partition and latency versus upload rate (gamma " + num(base.gamma) + ")";
  t.columns = {"rate_mbps"};
  t.columns.insert(t.columns.end(), kPlanColumns.begin(), kPlanColumns.end());
  for (double r : rates) {
    SystemConfig cfg = base;
    cfg.upload_rate = r;
    std::vector<std::string> row{num(to_mbps(r))};
    const auto cells = plan_cells(select_plan(candidates, cfg));
    row.insert(row.end(), cells.begin(), cells.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table gamma_sweep_table(const std::vector<PlanCandidate>& candidates,
                        const std::vector<double>& gammas, const SystemConfig& base) {
  Table t;
  t.name = "sweep_gamma";
  t.title = "Selected partition and latency versus gamma (R " + num(to_mbps(base.upload_rate)) +
            " Mbps)";
  t.columns = {"gamma"};
  t.columns.insert(t.columns.end(), kPlanColumns.begin(), kPlanColumns.end());
  for (double g : gammas) {
    SystemConfig cfg = base;
    cfg.gamma = g;
    std::vector<std::string> row{num(g)};
    const auto cells = plan_cells(select_plan(candidates, cfg));
    row.insert(row.end(), cells.begin(), cells.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table sweep_grid_table(const SweepResult& result) {
  Table t;
  t.name = "sweep_grid";
  t.title = "Selected plan over the rate x gamma grid";
  t.columns = {"rate_mbps", "gamma"};
  t.columns.insert(t.columns.end(), kPlanColumns.begin(), kPlanColumns.end());
  for (std::size_t i = 0; i < result.rates.size(); ++i) {
    for (std::size_t j = 0; j < result.gammas.size(); ++j) {
      std::vector<std::string> row{num(to_mbps(result.rates[i])), num(result.gammas[j])};
      const auto cells = plan_cells(result.plans[i][j]);
      row.insert(row.end(), cells.begin(), cells.end());
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table prune_curve_table(const Catalog& catalog) {
  Table t;
  t.name = "prune_curves";
  t.title = "Pruned fraction versus accuracy";
  t.columns = {"curve", "iteration", "record", "pruned_fraction", "accuracy", "below_threshold"};
  for (const CurvePoint& p : catalog.step1_curve()) {
    t.rows.push_back({"step1", std::to_string(p.iteration), "-", num(p.pruned_fraction),
                      num(p.accuracy), p.below_threshold ? "yes" : "no"});
  }
  const ModelSpec* spec = nullptr;
  ModelState original = catalog.load_state(0);
  spec = &original.spec;
  for (const auto& [layer, family] : catalog.families()) {
    const std::string name = "step2:" + layer_name(*spec, layer);
    for (const PrunedModelRecord& r : family) {
      t.rows.push_back({name, std::to_string(r.lineage.iteration), std::to_string(r.id),
                        num(r.pruned_fraction), num(r.accuracy), r.below_threshold ? "yes" : "no"});
    }
  }
  return t;
}

Table compression_table(const Catalog& catalog) {
  Table t;
  t.name = "compression";
  t.title = "Feature coding at pooling-layer boundaries";
  t.columns = {"record", "model", "partition", "after", "float_bytes", "quantized_bytes",
               "encoded_bytes", "ratio_vs_quantized", "ratio_vs_float"};
  for (const PrunedModelRecord* r : catalog.records()) {
    const ModelProfile* p = catalog.profile(r->id);
    if (p == nullptr) continue;
    for (std::size_t i = 0; i < p->layers.size(); ++i) {
      const LayerProfile& l = p->layers[i];
      if (l.kind != "pool" || l.encoded_bytes == 0) continue;
      t.rows.push_back({std::to_string(r->id), record_label(*r), std::to_string(i + 1), l.name,
                        std::to_string(l.bytes), std::to_string(l.elements),
                        std::to_string(l.encoded_bytes),
                        num(static_cast<double>(l.elements) / static_cast<double>(l.encoded_bytes)),
                        num(static_cast<double>(l.bytes) / static_cast<double>(l.encoded_bytes))});
    }
  }
  return t;
}

std::vector<ImprovementRow> latency_improvements(const Catalog& catalog,
                                                 const std::vector<double>& rates,
                                                 const SystemConfig& base) {
  const std::vector<PlanCandidate> all = plan_candidates(catalog);
  std::vector<PlanCandidate> original;
  for (const auto& c : all) {
    if (c.record_id == 0) original.push_back(c);
  }
  std::vector<ImprovementRow> rows;
  for (double r : rates) {
    SystemConfig cfg = base;
    cfg.upload_rate = r;
    ImprovementRow row;
    row.rate = r;
    row.original = select_plan(original, cfg);
    row.pruned = select_plan(all, cfg);
    if (row.original.feasible && row.pruned.feasible && row.pruned.total_s > 0.0) {
      row.improvement = row.original.total_s / row.pruned.total_s;
    }
    rows.push_back(row);
  }
  return rows;
}

Table improvement_table(const std::vector<ImprovementRow>& rows, double gamma) {
  Table t;
  t.name = "latency_improvement";
  t.title = "End-to-end latency improvement under typical uplinks (gamma " + num(gamma) + ")";
  t.columns = {"link", "rate_mbps", "original_partition", "original_ms", "pruned_record",
               "pruned_partition", "pruned_ms", "improvement"};
  for (const ImprovementRow& r : rows) {
    const double mbps = to_mbps(r.rate);
    std::string link = "custom";
    if (std::abs(mbps - 1.1) < 1e-9) link = "3G";
    else if (std::abs(mbps - 5.85) < 1e-9) link = "4G";
    else if (std::abs(mbps - 18.88) < 1e-9) link = "WiFi";
    auto cell = [](const PartitionPlan& p, auto f) { return p.feasible ? f(p) : std::string("-"); };
    t.rows.push_back(
        {link, num(mbps),
         cell(r.original, [](const PartitionPlan& p) { return std::to_string(p.partition); }),
         cell(r.original, [](const PartitionPlan& p) { return ms(p.total_s); }),
         cell(r.pruned, [](const PartitionPlan& p) { return std::to_string(p.record_id); }),
         cell(r.pruned, [](const PartitionPlan& p) { return std::to_string(p.partition); }),
         cell(r.pruned, [](const PartitionPlan& p) { return ms(p.total_s); }),
         r.improvement > 0.0 ? num(r.improvement) + "x" : "-"});
  }
  return t;
}

void write_table(const Table& table, const std::filesystem::path& dir,
                 const std::string& config_digest) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / (table.name + ".csv"), std::ios::binary);
  csv << to_csv(table, config_digest);
  std::ofstream md(dir / (table.name + ".md"), std::ios::binary);
  md << to_markdown(table, config_digest);
  if (!csv || !md) throw Error("cannot write table " + table.name + " under " + dir.string());
}

}  // namespace edgeprune
