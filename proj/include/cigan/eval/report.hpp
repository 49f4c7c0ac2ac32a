#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cigan/cls/harness.hpp"
#include "cigan/core/errors.hpp"
#include "cigan/core/io.hpp"
#include "cigan/eval/auc.hpp"
#include "cigan/eval/delong.hpp"

namespace cigan {

inline void write_scores_csv(const std::string& path, const std::vector<ScoreRecord>& scores) {
    CsvWriter csv(path, "id,label,score");
    for (const auto& s : scores)
        csv.row({s.id, std::to_string(s.label), format_number(s.score)});
    csv.flush();
}

inline std::vector<ScoreRecord> read_scores_csv(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || lines.front() != "id,label,score")
        throw DataError("scores file missing id,label,score header: " + path);
    std::vector<ScoreRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 3) throw DataError("malformed scores row in " + path);
        ScoreRecord rec;
        rec.id = cells[0];
        try {
            rec.label = std::stoi(cells[1]);
            rec.score = std::stod(cells[2]);
        } catch (const std::exception&) {
            throw DataError("malformed scores row in " + path + ": " + lines[i]);
        }
        out.push_back(std::move(rec));
    }
    if (out.empty()) throw DataError("scores file has no records: " + path);
    return out;
}

struct SchemeScores {
    std::string scheme;
    std::vector<ScoreRecord> scores;
    std::string checkpoint_hex; // fingerprint of the classifier checkpoint
};

struct EvalSchemeRow {
    std::string scheme;
    double auc = 0.0;
    double delong_variance = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    std::string checkpoint_hex;
};

struct EvalPairRow {
    std::string scheme_a;
    std::string scheme_b;
    double auc_a = 0.0;
    double auc_b = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct EvalReport {
    std::vector<EvalSchemeRow> schemes;
    std::vector<EvalPairRow> pairs;
};

// Per-scheme AUC plus all pairwise DeLong comparisons. Score files must
// cover the same test set: ids and labels are checked for alignment.
inline EvalReport build_report(const std::vector<SchemeScores>& runs) {
    if (runs.empty()) throw InvalidInputError("build_report: no scheme runs");
    const auto& ref = runs.front().scores;
    for (const auto& run : runs) {
        if (run.scores.size() != ref.size())
            throw DataError("build_report: scheme " + run.scheme +
                            " scored a different number of examples");
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (run.scores[i].id != ref[i].id || run.scores[i].label != ref[i].label)
                throw DataError("build_report: scheme " + run.scheme +
                                " is not aligned with " + runs.front().scheme + " at row " +
                                std::to_string(i + 1));
        }
    }

    std::vector<int> labels;
    for (const auto& rec : ref) labels.push_back(rec.label);

    EvalReport report;
    for (const auto& run : runs) {
        std::vector<double> scores;
        for (const auto& rec : run.scores) scores.push_back(rec.score);
        EvalSchemeRow row;
        row.scheme = run.scheme;
        row.auc = roc_auc(scores, labels);
        row.delong_variance = delong_variance(scores, labels);
        for (int l : labels) (l == 1 ? row.n_pos : row.n_neg) += 1;
        row.checkpoint_hex = run.checkpoint_hex;
        report.schemes.push_back(std::move(row));
    }
    for (std::size_t a = 0; a < runs.size(); ++a) {
        for (std::size_t b = a + 1; b < runs.size(); ++b) {
            std::vector<double> sa, sb;
            for (const auto& rec : runs[a].scores) sa.push_back(rec.score);
            for (const auto& rec : runs[b].scores) sb.push_back(rec.score);
            const DeLongResult d = delong_test(sa, sb, labels);
            EvalPairRow row;
            row.scheme_a = runs[a].scheme;
            row.scheme_b = runs[b].scheme;
            row.auc_a = d.auc_a;
            row.auc_b = d.auc_b;
            row.z = d.z;
            row.p_value = d.p_value;
            report.pairs.push_back(std::move(row));
        }
    }
    return report;
}

inline std::string render_report_text(const EvalReport& report) {
    std::string out;
    out += "Data augmentation scheme          AUC      n_pos  n_neg  DeLong var\n";
    out += "--------------------------------  -------  -----  -----  ----------\n";
    char buf[160];
    for (const auto& row : report.schemes) {
        std::snprintf(buf, sizeof(buf), "%-32s  %7.4f  %5zu  %5zu  %.4g\n", row.scheme.c_str(),
                      row.auc, row.n_pos, row.n_neg, row.delong_variance);
        out += buf;
    }
    out += "\nPairwise DeLong tests\n";
    out += "scheme_a                          scheme_b                          z         p\n";
    for (const auto& p : report.pairs) {
        std::snprintf(buf, sizeof(buf), "%-32s  %-32s  %8.4f  %.4g\n", p.scheme_a.c_str(),
                      p.scheme_b.c_str(), p.z, p.p_value);
        out += buf;
    }
    return out;
}

inline std::string render_report_csv(const EvalReport& report) {
    std::string out = "scheme,auc,n_pos,n_neg,delong_variance,checkpoint\n";
    for (const auto& row : report.schemes) {
        out += row.scheme + "," + format_number(row.auc) + "," + std::to_string(row.n_pos) + "," +
               std::to_string(row.n_neg) + "," + format_number(row.delong_variance) + "," +
               row.checkpoint_hex + "\n";
    }
    out += "\nscheme_a,scheme_b,auc_a,auc_b,z,p_value\n";
    for (const auto& p : report.pairs) {
        out += p.scheme_a + "," + p.scheme_b + "," + format_number(p.auc_a) + "," +
               format_number(p.auc_b) + "," + format_number(p.z) + "," +
               format_number(p.p_value) + "\n";
    }
    return out;
}

} // namespace cigan
