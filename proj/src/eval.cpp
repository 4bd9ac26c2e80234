#include "mrpcen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mrpcen/error.hpp"

namespace mrpcen {

void EventList::validate() const {
  require(duration > 0.0 && std::isfinite(duration), "EventList: duration must be positive");
  for (const auto& e : events) {
    require(e.onset >= 0.0 && e.onset < e.offset,
            "EventList: event '" + e.label + "' needs 0 <= onset < offset");
    require(e.offset <= duration + 1e-9, "EventList: event '" + e.label + "' ends after the clip");
    require(class_index(e.label) >= 0, "EventList: label '" + e.label + "' is not in the vocabulary");
  }
}

int EventList::class_index(const std::string& label) const {
  const auto it = std::find(vocabulary.begin(), vocabulary.end(), label);
  return it == vocabulary.end() ? -1 : static_cast<int>(it - vocabulary.begin());
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_seconds(const std::string& field, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    throw FormatError(where + ": '" + field + "' is not a number");
  }
  if (used != field.size() || !std::isfinite(v)) {
    throw FormatError(where + ": '" + field + "' is not a number");
  }
  return v;
}

}  // namespace

std::vector<Event> read_event_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file, header required");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  std::string header;
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) header.push_back(c);
  }
  if (header != "onset,offset,label") {
    throw FormatError(path.string() + ": expected header 'onset,offset,label', got '" + trim(line) + "'");
  }

  std::vector<Event> events;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw FormatError(where + ": expected 3 fields");
    Event e;
    e.onset = parse_seconds(trim(line.substr(0, c1)), where);
    e.offset = parse_seconds(trim(line.substr(c1 + 1, c2 - c1 - 1)), where);
    e.label = trim(line.substr(c2 + 1));
    if (e.label.empty()) throw FormatError(where + ": empty label");
    events.push_back(std::move(e));
  }
  return events;
}

void write_event_csv(const std::filesystem::path& path, const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write annotation file: " + path.string());
  out << "onset,offset,label\n";
  out.precision(17);
  for (const auto& e : events) out << e.onset << ',' << e.offset << ',' << e.label << '\n';
  if (!out) throw IoError("short write: " + path.string());
}

namespace {

Eigen::Index segment_count(double duration, double segment_length) {
  // Tolerance keeps 10.0 / 1.0 from becoming 11 segments through rounding.
  return static_cast<Eigen::Index>(std::ceil(duration / segment_length - 1e-9));
}

}  // namespace

Eigen::MatrixXi segmentize(const EventList& events, double segment_length) {
  require(segment_length > 0.0 && std::isfinite(segment_length),
          "segmentize: segment_length must be positive");
  require(!events.vocabulary.empty(), "segmentize: empty vocabulary");
  events.validate();

  const Eigen::Index n_seg = segment_count(events.duration, segment_length);
  Eigen::MatrixXi activity = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(events.vocabulary.size()), n_seg);
  for (const auto& e : events.events) {
    const int c = events.class_index(e.label);
    const auto first = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(e.onset / segment_length)));
    const auto last = std::min<Eigen::Index>(n_seg - 1, static_cast<Eigen::Index>(std::floor(e.offset / segment_length)));
    for (Eigen::Index k = first; k <= last; ++k) {
      const double lo = std::max(e.onset, static_cast<double>(k) * segment_length);
      const double hi = std::min(e.offset, static_cast<double>(k + 1) * segment_length);
      if (hi > lo) activity(c, k) = 1;
    }
  }
  return activity;
}

SegmentCounts& SegmentCounts::operator+=(const SegmentCounts& other) {
  if (vocabulary.empty() && true_positives.size() == 0) {
    *this = other;
    return *this;
  }
  require(vocabulary == other.vocabulary, "SegmentCounts: vocabulary mismatch");
  true_positives += other.true_positives;
  false_positives += other.false_positives;
  false_negatives += other.false_negatives;
  segments.insert(segments.end(), other.segments.begin(), other.segments.end());
  return *this;
}

SegmentCounts segment_counts(const EventList& reference, const EventList& estimate,
                             double segment_length) {
  require(reference.vocabulary == estimate.vocabulary, "segment_counts: vocabulary mismatch");
  require(std::abs(reference.duration - estimate.duration) <= 1e-6,
          "segment_counts: duration mismatch (" + std::to_string(reference.duration) + " s vs " +
              std::to_string(estimate.duration) + " s)");
  const Eigen::MatrixXi ref = segmentize(reference, segment_length);
  const Eigen::MatrixXi est = segmentize(estimate, segment_length);

  const auto both = ref.cwiseProduct(est);
  SegmentCounts counts;
  counts.vocabulary = reference.vocabulary;
  counts.segment_length = segment_length;
  counts.true_positives = both.rowwise().sum();
  counts.false_positives = (est - both).rowwise().sum();
  counts.false_negatives = (ref - both).rowwise().sum();
  for (Eigen::Index k = 0; k < ref.cols(); ++k) {
    SegmentTally tally;
    tally.n_ref = ref.col(k).sum();
    tally.n_est = est.col(k).sum();
    const int tp = both.col(k).sum();
    tally.false_negatives = tally.n_ref - tp;
    tally.false_positives = tally.n_est - tp;
    counts.segments.push_back(tally);
  }
  return counts;
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

namespace {

double ratio(long num, long den) { return den > 0 ? static_cast<double>(num) / den : 0.0; }

}  // namespace

MetricsReport compute_metrics(const SegmentCounts& counts) {
  const auto n_classes = static_cast<Eigen::Index>(counts.vocabulary.size());
  require(counts.true_positives.size() == n_classes && counts.false_positives.size() == n_classes &&
              counts.false_negatives.size() == n_classes,
          "compute_metrics: per-class count vectors do not match the vocabulary");
  require((counts.true_positives.array() >= 0).all() && (counts.false_positives.array() >= 0).all() &&
              (counts.false_negatives.array() >= 0).all(),
          "compute_metrics: negative counts");

  MetricsReport report;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  for (Eigen::Index c = 0; c < n_classes; ++c) {
    ClassMetrics m;
    m.label = counts.vocabulary[static_cast<std::size_t>(c)];
    m.true_positives = counts.true_positives[c];
    m.false_positives = counts.false_positives[c];
    m.false_negatives = counts.false_negatives[c];
    m.support = m.true_positives + m.false_negatives;
    m.precision = ratio(m.true_positives, m.true_positives + m.false_positives);
    m.recall = ratio(m.true_positives, m.true_positives + m.false_negatives);
    m.f1 = f1_score(m.precision, m.recall);
    tp += m.true_positives;
    fp += m.false_positives;
    fn += m.false_negatives;
    report.per_class.push_back(std::move(m));
  }
  report.precision = ratio(tp, tp + fp);
  report.recall = ratio(tp, tp + fn);
  report.f1 = f1_score(report.precision, report.recall);

  long subs = 0;
  long dels = 0;
  long ins = 0;
  long n_ref = 0;
  for (const auto& s : counts.segments) {
    subs += std::min(s.false_negatives, s.false_positives);
    dels += std::max(0, s.false_negatives - s.false_positives);
    ins += std::max(0, s.false_positives - s.false_negatives);
    n_ref += s.n_ref;
  }
  if (n_ref > 0) {
    report.substitution_rate = ratio(subs, n_ref);
    report.deletion_rate = ratio(dels, n_ref);
    report.insertion_rate = ratio(ins, n_ref);
    report.error_rate = static_cast<double>(subs + dels + ins) / n_ref;
  }
  return report;
}

std::vector<MetricsReport> bootstrap_evaluate(const std::vector<SegmentCounts>& per_clip,
                                              int n_samples, int n_reps, std::uint64_t seed) {
  require(!per_clip.empty(), "bootstrap_evaluate: no clips");
  require(n_samples >= 1 && n_reps >= 1, "bootstrap_evaluate: n_samples and n_reps must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, per_clip.size() - 1);
  std::vector<MetricsReport> reports;
  reports.reserve(static_cast<std::size_t>(n_reps));
  for (int rep = 0; rep < n_reps; ++rep) {
    SegmentCounts pooled;
    for (int i = 0; i < n_samples; ++i) pooled += per_clip[pick(rng)];
    reports.push_back(compute_metrics(pooled));
  }
  return reports;
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), "percentile: empty sample");
  require(q >= 0.0 && q <= 100.0, "percentile: q must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

EventList threshold_detector(const Eigen::MatrixXd& features, double frame_rate,
                             const std::vector<std::string>& vocabulary,
                             const std::vector<DetectorBands>& bands, double threshold,
                             double duration) {
  require(frame_rate > 0.0, "threshold_detector: frame_rate must be positive");
  EventList out;
  out.vocabulary = vocabulary;
  const Eigen::Index n_frames = features.cols();
  out.duration = duration > 0.0 ? duration : static_cast<double>(n_frames) / frame_rate;

  for (const auto& b : bands) {
    require(std::find(vocabulary.begin(), vocabulary.end(), b.label) != vocabulary.end(),
            "threshold_detector: band label '" + b.label + "' is not in the vocabulary");
    require(b.first_band >= 0 && b.first_band < b.last_band && b.last_band <= features.rows(),
            "threshold_detector: invalid band range [" + std::to_string(b.first_band) + ", " +
                std::to_string(b.last_band) + ") for '" + b.label + "' with " +
                std::to_string(features.rows()) + " bands");
    const Eigen::RowVectorXd level =
        features.middleRows(b.first_band, b.last_band - b.first_band).colwise().mean();
    Eigen::Index t = 0;
    while (t < n_frames) {
      if (!(level[t] > threshold)) {
        ++t;
        continue;
      }
      const Eigen::Index start = t;
      while (t < n_frames && level[t] > threshold) ++t;
      const double onset = static_cast<double>(start) / frame_rate;
      const double offset = std::min(static_cast<double>(t) / frame_rate, out.duration);
      if (offset > onset) out.events.push_back({onset, offset, b.label});
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const Event& a, const Event& b) { return a.onset < b.onset; });
  return out;
}

EventList threshold_detector(const MultiRateStack& stack, const std::vector<std::string>& vocabulary,
                             const std::vector<DetectorBands>& bands, double threshold,
                             double duration) {
  require(stack.n_rates() > 0, "threshold_detector: empty stack");
  return threshold_detector(stack.mean_over_rates(), stack.spec.frame_rate(), vocabulary, bands,
                            threshold, duration);
}

}  // namespace mrpcen
