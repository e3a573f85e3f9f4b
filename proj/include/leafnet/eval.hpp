#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace leafnet {

/// Square count matrix; rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t n_classes = 0) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

    std::size_t classes() const noexcept { return n_; }
    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * n_ + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }

    std::uint64_t total() const noexcept;
    std::uint64_t trace() const noexcept;
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t col_sum(std::size_t pred) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

/// Throws ArgumentError on unequal lengths or a label >= n_classes.
ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                          std::size_t n_classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;    // row sum
    std::uint64_t predicted = 0;  // column sum
    /// A denominator was zero and the affected score was set to 0.
    bool flagged = false;
};

struct MetricsReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    /// Classes that occur in neither the labels nor the predictions; they
    /// are left out of the macro means.
    std::size_t absent_classes = 0;
    std::vector<ClassMetrics> per_class;
};

/// Per-class and macro precision, recall and F1. A class that occurs but has
/// an empty row or column scores 0 for the undefined value and is flagged.
/// Throws ArgumentError when the matrix holds no samples.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// Fraction as a percentage with two decimals, e.g. 0.98174 -> "98.17 %".
std::string format_percent(double fraction);

nlohmann::json report_to_json(const MetricsReport& report, const std::vector<std::string>& class_names);
/// Aligned text table: one row per class, then accuracy and macro rows.
std::string format_report(const MetricsReport& report, const std::vector<std::string>& class_names);

struct LabeledConfusion {
    ConfusionMatrix matrix;
    std::vector<std::string> class_names;

    /// Count addressed by class names; throws ArgumentError for unknown names.
    std::uint64_t at(const std::string& truth, const std::string& pred) const;
};

/// First row and first column hold class names; the corner cell is "true\predicted".
std::string format_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);
void export_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                          const std::filesystem::path& path);
LabeledConfusion parse_confusion_csv(const std::string& text);

/// Display names "Plant / Condition" for the 38-class table.
std::vector<std::string> default_class_names();

}  // namespace leafnet
