#include "anthrofit/audit.h"

#include "anthrofit/error.h"
#include "anthrofit/io.h"
#include "anthrofit/measure.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace anthrofit {

namespace {

bool endsWith(const std::string& s, const std::string& suffix) {
  return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool startsWith(const std::string& s, const std::string& prefix) {
  return s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

struct PersonStats {
  double sigma = 0.0;
  double rel_sigma = 0.0;
  double rel_range = 0.0;
};

PersonStats personStats(const Eigen::VectorXd& x) {
  const double n = static_cast<double>(x.size());
  const double avg = x.mean();
  const double range = x.maxCoeff() - x.minCoeff();
  // Constant samples give exactly zero, whatever the rounding of the mean.
  const double sigma = range == 0.0 ? 0.0 : std::sqrt((x.array() - avg).square().sum() / (n - 1.0));
  PersonStats s;
  s.sigma = sigma;
  if (avg != 0.0) {
    s.rel_sigma = 100.0 * sigma / std::abs(avg);
    s.rel_range = 100.0 * range / std::abs(avg);
  } else {
    s.rel_sigma = sigma == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    s.rel_range = range == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

void checkPersons(const std::vector<PersonSeries>& persons, Eigen::Index dims) {
  ANTHROFIT_THROW_IF(persons.empty(), ErrorCode::kTooFewSamples, "no persons to audit");
  for (const auto& p : persons) {
    ANTHROFIT_THROW_IF(
        p.samples.rows() < 2,
        ErrorCode::kTooFewSamples,
        "person '" + p.person_id + "' has " + std::to_string(p.samples.rows()) + " samples, need at least 2");
    ANTHROFIT_THROW_IF(
        p.samples.cols() != dims,
        ErrorCode::kDimensionMismatch,
        "person '" + p.person_id + "' has " + std::to_string(p.samples.cols()) + " columns, expected " +
            std::to_string(dims));
    ANTHROFIT_THROW_IF(
        !p.samples.allFinite(), ErrorCode::kNonFiniteInput, "person '" + p.person_id + "' has non-finite samples");
  }
}

std::string idString(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

/// Groups rows by person in order of first appearance.
class Grouper {
 public:
  void add(const std::string& person, const Eigen::VectorXd& row) {
    auto it = index_.find(person);
    if (it == index_.end()) {
      it = index_.emplace(person, rows_.size()).first;
      ids_.push_back(person);
      rows_.emplace_back();
    }
    rows_[it->second].push_back(row);
  }

  std::vector<PersonSeries> series() const {
    std::vector<PersonSeries> out;
    for (size_t p = 0; p < ids_.size(); ++p) {
      const auto& rows = rows_[p];
      PersonSeries s{ids_[p], Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), rows.front().size())};
      for (size_t i = 0; i < rows.size(); ++i) {
        s.samples.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
      }
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  std::map<std::string, size_t> index_;
  std::vector<std::string> ids_;
  std::vector<std::vector<Eigen::VectorXd>> rows_;
};

int frameCount(const std::vector<PersonSeries>& persons) {
  int n = 0;
  for (const auto& p : persons) {
    n += static_cast<int>(p.samples.rows());
  }
  return n;
}

} // namespace

std::string sideless(const std::string& name) {
  for (const char* suffix : {"_left", "_right", "_l", "_r"}) {
    if (endsWith(name, suffix)) {
      return name.substr(0, name.size() - std::char_traits<char>::length(suffix));
    }
  }
  for (const char* prefix : {"left_", "right_"}) {
    if (startsWith(name, prefix)) {
      return name.substr(std::char_traits<char>::length(prefix));
    }
  }
  return name;
}

StatsReport consistencyStats(
    const std::vector<std::string>& names,
    const std::vector<PersonSeries>& persons,
    const AuditOptions& options) {
  const auto M = static_cast<Eigen::Index>(names.size());
  checkPersons(persons, M);

  std::vector<DispersionRow> perDim(static_cast<size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) {
    DispersionRow& row = perDim[static_cast<size_t>(m)];
    row.name = names[static_cast<size_t>(m)];
    for (const auto& p : persons) {
      const PersonStats s = personStats(p.samples.col(m));
      row.sigma += s.sigma;
      row.rel_sigma_percent += s.rel_sigma;
      row.rel_range_percent += s.rel_range;
    }
    const double n = static_cast<double>(persons.size());
    row.sigma = row.sigma / n * options.to_report_unit;
    row.rel_sigma_percent /= n;
    row.rel_range_percent /= n;
  }

  StatsReport report;
  report.persons_covered = static_cast<int>(persons.size());
  report.frames_covered = frameCount(persons);
  if (!options.merge_sides) {
    report.rows = std::move(perDim);
    return report;
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<const DispersionRow*>> groups;
  for (const auto& row : perDim) {
    const std::string key = sideless(row.name);
    if (!groups.count(key)) {
      order.push_back(key);
    }
    groups[key].push_back(&row);
  }
  for (const auto& key : order) {
    const auto& members = groups[key];
    DispersionRow merged;
    merged.name = members.size() > 1 ? key : members.front()->name;
    for (const DispersionRow* r : members) {
      merged.sigma += r->sigma;
      merged.rel_sigma_percent += r->rel_sigma_percent;
      merged.rel_range_percent += r->rel_range_percent;
    }
    const double n = static_cast<double>(members.size());
    merged.sigma /= n;
    merged.rel_sigma_percent /= n;
    merged.rel_range_percent /= n;
    report.rows.push_back(merged);
  }
  return report;
}

double betaSigmaMean(const std::vector<PersonSeries>& betas) {
  ANTHROFIT_THROW_IF(betas.empty(), ErrorCode::kTooFewSamples, "no persons to audit");
  const Eigen::Index B = betas.front().samples.cols();
  ANTHROFIT_THROW_IF(B == 0, ErrorCode::kDimensionMismatch, "shape vectors are empty");
  checkPersons(betas, B);
  double total = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    for (const auto& p : betas) {
      total += personStats(p.samples.col(b)).sigma;
    }
  }
  return total / static_cast<double>(B * static_cast<Eigen::Index>(betas.size()));
}

std::vector<BoneLength> boneLengths(const Pointsd& keypoints, const std::vector<Bone>& skeleton) {
  std::vector<BoneLength> out;
  out.reserve(skeleton.size());
  const auto K = static_cast<int>(keypoints.rows());
  for (const auto& bone : skeleton) {
    ANTHROFIT_THROW_IF(
        bone.a < 0 || bone.b < 0 || bone.a >= K || bone.b >= K,
        ErrorCode::kIndexOutOfRange,
        "bone '" + bone.name + "' refers to a keypoint outside 0.." + std::to_string(K - 1));
    const double d = (keypoints.row(bone.a) - keypoints.row(bone.b)).norm();
    out.push_back({bone.name, 100.0 * d, d == 0.0});
  }
  return out;
}

std::vector<Bone> skeletonFromParents(const BodyModel& model) {
  std::vector<Bone> out;
  for (int j = 1; j < model.numJoints(); ++j) {
    const std::string name =
        j < static_cast<int>(model.joint_names.size()) ? model.joint_names[j] : "joint_" + std::to_string(j);
    out.push_back({name, model.parents[j], j});
  }
  return out;
}

PersonSeries boneLengthSeries(
    const std::string& personId,
    const std::vector<Pointsd>& frames,
    const std::vector<Bone>& skeleton,
    std::vector<std::string>* flags) {
  PersonSeries s{personId, Eigen::MatrixXd(static_cast<Eigen::Index>(frames.size()), skeleton.size())};
  for (size_t f = 0; f < frames.size(); ++f) {
    const auto lengths = boneLengths(frames[f], skeleton);
    for (size_t b = 0; b < lengths.size(); ++b) {
      s.samples(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) = lengths[b].length_cm;
      if (lengths[b].degenerate && flags) {
        flags->push_back(
            "person '" + personId + "' frame " + std::to_string(f) + ": bone '" + lengths[b].name + "' has zero length");
      }
    }
  }
  return s;
}

AuditData auditDataFromCsv(const std::string& text, const std::string& personColumn, const std::string& defaultPerson) {
  const CsvTable table = parseCsv(text);
  const int personCol = table.column(personColumn);
  std::vector<int> measureCols;
  std::vector<int> betaCols;
  AuditData data;
  for (int c = 0; c < static_cast<int>(table.header.size()); ++c) {
    const std::string& h = table.header[c];
    if (c == personCol || h == "frame_id") {
      continue;
    }
    if (startsWith(h, "beta_")) {
      betaCols.push_back(c);
    } else {
      measureCols.push_back(c);
      data.names.push_back(h);
    }
  }
  Grouper measures;
  Grouper shapes;
  for (const auto& row : table.rows) {
    const std::string person = personCol >= 0 ? row[personCol] : defaultPerson;
    if (!measureCols.empty()) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(measureCols.size()));
      for (size_t i = 0; i < measureCols.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = parseNumber(row[measureCols[i]]);
      }
      measures.add(person, v);
    }
    if (!betaCols.empty()) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(betaCols.size()));
      for (size_t i = 0; i < betaCols.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = parseNumber(row[betaCols[i]]);
      }
      shapes.add(person, v);
    }
  }
  if (!table.rows.empty()) {
    if (!measureCols.empty()) {
      data.measurements = measures.series();
    }
    if (!betaCols.empty()) {
      data.betas = shapes.series();
    }
  }
  return data;
}

AuditData auditDataFromJsonLines(
    const std::vector<nlohmann::json>& lines,
    const std::string& personColumn,
    const std::string& defaultPerson,
    const BodyModel* body) {
  AuditData data;
  Grouper measures;
  Grouper shapes;
  std::optional<Measurer> measurer;
  if (body) {
    measurer.emplace(*body);
  }
  bool haveNames = false;
  auto setNames = [&](const std::vector<std::string>& names) {
    if (!haveNames) {
      data.names = names;
      haveNames = true;
    }
    ANTHROFIT_THROW_IF(
        names != data.names, ErrorCode::kDimensionMismatch, "lines carry different measurement sets");
  };
  try {
    for (const auto& line : lines) {
      if (line.contains("present") && line["present"].is_boolean() && !line["present"].get<bool>()) {
        continue;
      }
      const std::string person = line.contains(personColumn) ? idString(line[personColumn]) : defaultPerson;
      if (line.contains("measurements") && line["measurements"].is_object()) {
        std::vector<std::string> names;
        Eigen::VectorXd v(static_cast<Eigen::Index>(line["measurements"].size()));
        Eigen::Index i = 0;
        for (const auto& [name, value] : line["measurements"].items()) {
          names.push_back(name);
          v(i++) = value.get<double>();
        }
        setNames(names);
        measures.add(person, v);
      }
      if (line.contains("beta") && line["beta"].is_array()) {
        const auto beta = line["beta"].get<std::vector<double>>();
        const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        shapes.add(person, b);
        if (measurer && !line.contains("measurements")) {
          const AnthroVector a = measurer->b2a(b);
          setNames(a.names);
          measures.add(person, a.values);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed audit line: ") + e.what());
  }
  if (haveNames) {
    data.measurements = measures.series();
  }
  bool anyShape = false;
  for (const auto& line : lines) {
    anyShape = anyShape || (line.contains("beta") && line["beta"].is_array());
  }
  if (anyShape) {
    data.betas = shapes.series();
  }
  return data;
}

StatsReport audit(const AuditData& data, const AuditOptions& options) {
  ANTHROFIT_THROW_IF(
      data.measurements.empty() && data.betas.empty(), ErrorCode::kTooFewSamples, "no measurements or shapes to audit");
  StatsReport report;
  if (!data.measurements.empty()) {
    report = consistencyStats(data.names, data.measurements, options);
  } else {
    report.persons_covered = static_cast<int>(data.betas.size());
    report.frames_covered = frameCount(data.betas);
  }
  if (!data.betas.empty()) {
    report.beta_sigma_mean = betaSigmaMean(data.betas);
  }
  return report;
}

nlohmann::ordered_json toJson(const StatsReport& report) {
  nlohmann::ordered_json j;
  j["unit"] = report.unit;
  j["persons_covered"] = report.persons_covered;
  j["frames_covered"] = report.frames_covered;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["sigma"] = r.sigma;
    row["rel_sigma_percent"] = r.rel_sigma_percent;
    row["rel_range_percent"] = r.rel_range_percent;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["beta_sigma_mean"] = report.beta_sigma_mean ? nlohmann::ordered_json(*report.beta_sigma_mean) : nullptr;
  j["flags"] = report.flags;
  return j;
}

namespace {

std::string fixed2(double v) {
  if (!std::isfinite(v)) {
    return "-";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pad(const std::string& s, size_t width, bool left) {
  if (s.size() >= width) {
    return s;
  }
  const std::string fill(width - s.size(), ' ');
  return left ? s + fill : fill + s;
}

} // namespace

std::string formatTable(const StatsReport& report) {
  const std::string sigmaHead = "sigma [" + report.unit + "]";
  std::vector<std::array<std::string, 4>> cells;
  cells.push_back({"Measure", sigmaHead, "r. sigma", "r. range"});
  for (const auto& r : report.rows) {
    cells.push_back({r.name, fixed2(r.sigma), fixed2(r.rel_sigma_percent) + "%", fixed2(r.rel_range_percent) + "%"});
  }
  if (report.beta_sigma_mean) {
    cells.push_back({"beta param.", fixed2(*report.beta_sigma_mean), "", ""});
  }
  std::array<size_t, 4> width{};
  for (const auto& row : cells) {
    for (size_t c = 0; c < 4; ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    std::string line = pad(cells[i][0], width[0], true);
    for (size_t c = 1; c < 4; ++c) {
      line += "  " + pad(cells[i][c], width[c], false);
    }
    while (!line.empty() && line.back() == ' ') {
      line.pop_back();
    }
    out += line + "\n";
    if (i == 0) {
      out += std::string(width[0] + width[1] + width[2] + width[3] + 6, '-') + "\n";
    }
  }
  return out;
}

} // namespace anthrofit
