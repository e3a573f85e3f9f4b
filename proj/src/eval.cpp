#include "leafnet/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "leafnet/classes.hpp"
#include "leafnet/image.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

std::uint64_t ConfusionMatrix::total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += counts_[i * n_ + i];
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < n_; ++t) s += at(t, pred);
    return s;
}

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                          std::size_t n_classes) {
    if (truth.size() != predicted.size()) {
        throw ArgumentError("confusion: " + std::to_string(truth.size()) + " true labels but " +
                            std::to_string(predicted.size()) + " predictions");
    }
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= n_classes || predicted[i] >= n_classes) {
            throw ArgumentError("confusion: label pair (" + std::to_string(truth[i]) + ", " +
                                std::to_string(predicted[i]) + ") at index " + std::to_string(i) +
                                " is outside [0, " + std::to_string(n_classes) + ")");
        }
        ++cm.at(truth[i], predicted[i]);
    }
    return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw ArgumentError("compute_metrics: confusion matrix holds no samples");
    MetricsReport r;
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    std::size_t present = 0;
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        ClassMetrics m;
        m.support = cm.row_sum(c);
        m.predicted = cm.col_sum(c);
        const auto tp = static_cast<double>(cm.at(c, c));
        if (m.predicted > 0) m.precision = tp / static_cast<double>(m.predicted);
        if (m.support > 0) m.recall = tp / static_cast<double>(m.support);
        if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
        m.flagged = m.support == 0 || m.predicted == 0;
        if (m.support == 0 && m.predicted == 0) {
            ++r.absent_classes;
        } else {
            ++present;
            r.macro_precision += m.precision;
            r.macro_recall += m.recall;
            r.macro_f1 += m.f1;
        }
        r.per_class.push_back(m);
    }
    const auto n = static_cast<double>(present);
    r.macro_precision /= n;
    r.macro_recall /= n;
    r.macro_f1 /= n;
    return r;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f %%", fraction * 100.0);
    return buf;
}

namespace {

std::string name_or_index(const std::vector<std::string>& names, std::size_t i) {
    return i < names.size() ? names[i] : "class " + std::to_string(i);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                out.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.emplace_back();
        } else if (ch != '\r') {
            out.back() += ch;
        }
    }
    if (quoted) throw ArgumentError("unterminated quote in CSV line: " + line);
    return out;
}

}  // namespace

nlohmann::json report_to_json(const MetricsReport& report, const std::vector<std::string>& class_names) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& m = report.per_class[c];
        per_class.push_back({{"class_index", c},
                             {"name", name_or_index(class_names, c)},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support},
                             {"predicted", m.predicted},
                             {"flagged", m.flagged}});
    }
    return {{"accuracy", report.accuracy},
            {"macro_precision", report.macro_precision},
            {"macro_recall", report.macro_recall},
            {"macro_f1", report.macro_f1},
            {"absent_classes", report.absent_classes},
            {"per_class", per_class}};
}

std::string format_report(const MetricsReport& report, const std::vector<std::string>& class_names) {
    std::size_t width = 16;
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        width = std::max(width, name_or_index(class_names, c).size());
    }
    std::string out;
    char buf[512];
    auto row = [&](const std::string& name, const std::string& p, const std::string& r, const std::string& f,
                   const std::string& s) {
        std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %7s\n", static_cast<int>(width), name.c_str(),
                      p.c_str(), r.c_str(), f.c_str(), s.c_str());
        out += buf;
    };
    row("class", "precision", "recall", "f1", "support");
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& m = report.per_class[c];
        if (m.support == 0 && m.predicted == 0) continue;
        row(name_or_index(class_names, c) + (m.flagged ? " *" : ""), format_percent(m.precision),
            format_percent(m.recall), format_percent(m.f1), std::to_string(m.support));
    }
    out += "\n";
    row("macro average", format_percent(report.macro_precision), format_percent(report.macro_recall),
        format_percent(report.macro_f1), "");
    out += "Accuracy: " + format_percent(report.accuracy) + "\n";
    const bool any_flagged = std::any_of(report.per_class.begin(), report.per_class.end(),
                                         [](const ClassMetrics& m) { return m.flagged && (m.support || m.predicted); });
    if (any_flagged) out += "* no true samples or no predictions for this class; undefined scores count as 0\n";
    return out;
}

std::uint64_t LabeledConfusion::at(const std::string& truth, const std::string& pred) const {
    auto index = [&](const std::string& name) {
        const auto it = std::find(class_names.begin(), class_names.end(), name);
        if (it == class_names.end()) throw ArgumentError("unknown class name '" + name + "'");
        return static_cast<std::size_t>(it - class_names.begin());
    };
    return matrix.at(index(truth), index(pred));
}

std::string format_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    if (class_names.size() != cm.classes()) {
        throw ArgumentError("confusion CSV needs " + std::to_string(cm.classes()) + " class names, got " +
                            std::to_string(class_names.size()));
    }
    std::string out = "true\\predicted";
    for (const auto& n : class_names) out += "," + csv_field(n);
    out += "\n";
    for (std::size_t t = 0; t < cm.classes(); ++t) {
        out += csv_field(class_names[t]);
        for (std::size_t p = 0; p < cm.classes(); ++p) out += "," + std::to_string(cm.at(t, p));
        out += "\n";
    }
    return out;
}

void export_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                          const std::filesystem::path& path) {
    const std::string text = format_confusion_csv(cm, class_names);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

LabeledConfusion parse_confusion_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError("confusion CSV is empty");
    auto header = split_csv_line(line);
    header.erase(header.begin());
    LabeledConfusion out{ConfusionMatrix(header.size()), header};
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (row >= header.size() || cells.size() != header.size() + 1 || cells[0] != header[row]) {
            throw ArgumentError("confusion CSV row " + std::to_string(row + 2) + " does not match the header");
        }
        for (std::size_t p = 0; p < header.size(); ++p) {
            const std::string& cell = cells[p + 1];
            if (cell.empty() || cell.find_first_not_of("0123456789") != std::string::npos) {
                throw ArgumentError("confusion CSV cell '" + cell + "' is not a count");
            }
            out.matrix.at(row, p) = std::stoull(cell);
        }
        ++row;
    }
    if (row != header.size()) {
        throw ArgumentError("confusion CSV has " + std::to_string(row) + " rows for " +
                            std::to_string(header.size()) + " classes");
    }
    return out;
}

std::vector<std::string> default_class_names() {
    std::vector<std::string> out;
    for (const auto& c : class_table()) out.push_back(c.plant + " / " + c.condition);
    return out;
}

}  // namespace leafnet
