#include "graphio/csvio.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace graphio {

using numkit::ConfigError;
using numkit::Tensor;

nlohmann::json prep_to_json(const PreprocessConfig& prep) {
    nlohmann::json j;
    j["window_len"] = prep.window_len;
    j["stride"] = prep.stride;
    j["k"] = prep.k;
    j["zscore"] = prep.zscore;
    j["node_mode"] = node_mode_name(prep.node_mode);
    j["segment_count"] = prep.segment_count;
    return j;
}

PreprocessConfig prep_from_json(const nlohmann::json& j) {
    PreprocessConfig prep;
    prep.window_len = j.at("window_len").get<int>();
    prep.stride = j.at("stride").get<int>();
    prep.k = j.at("k").get<int>();
    prep.zscore = j.at("zscore").get<bool>();
    prep.node_mode = node_mode_from_name(j.at("node_mode").get<std::string>());
    prep.segment_count = j.at("segment_count").get<int>();
    prep.validate();
    return prep;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, const std::filesystem::path& file, int row, int col) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError(file.string() + ": non-numeric cell '" + cell + "' at row " +
                          std::to_string(row) + ", column " + std::to_string(col));
    return value;
}

}  // namespace

SignalRecord load_csv_record(const std::filesystem::path& csv_path, int label,
                             const std::vector<std::string>& channel_columns) {
    std::ifstream in(csv_path);
    if (!in) throw ConfigError("cannot open CSV file: " + csv_path.string());

    std::string line;
    if (!std::getline(in, line)) throw ConfigError(csv_path.string() + ": empty file, header expected");
    std::vector<std::string> header = split_csv_line(line);
    for (std::string& h : header) {
        while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
    }

    std::vector<int> selected;
    if (channel_columns.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) selected.push_back(static_cast<int>(i));
    } else {
        for (const std::string& want : channel_columns) {
            int idx = -1;
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == want) { idx = static_cast<int>(i); break; }
            if (idx < 0) throw ConfigError(csv_path.string() + ": channel column '" + want + "' not found");
            selected.push_back(idx);
        }
    }

    std::vector<std::vector<double>> rows;
    int row_number = 1;  // header was row 1
    while (std::getline(in, line)) {
        ++row_number;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ConfigError(csv_path.string() + ": row " + std::to_string(row_number) + " has " +
                              std::to_string(cells.size()) + " columns, header has " +
                              std::to_string(header.size()));
        std::vector<double> row;
        row.reserve(selected.size());
        for (int idx : selected)
            row.push_back(parse_cell(cells[static_cast<std::size_t>(idx)], csv_path, row_number, idx + 1));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError(csv_path.string() + ": no data rows");

    int m = static_cast<int>(selected.size());
    int L = static_cast<int>(rows.size());
    SignalRecord rec;
    rec.label = label;
    rec.channels = Tensor::zeros(m, L);
    for (int i = 0; i < L; ++i)
        for (int c = 0; c < m; ++c)
            rec.channels.at(c, i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    return rec;
}

Dataset load_csv_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open manifest: " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(manifest_path.string() + ": invalid JSON: " + e.what());
    }
    if (!j.is_array()) throw ConfigError(manifest_path.string() + ": manifest must be a JSON array");

    std::filesystem::path base = manifest_path.parent_path();
    Dataset data;
    for (const nlohmann::json& entry : j) {
        if (!entry.contains("csv") || !entry.contains("label"))
            throw ConfigError(manifest_path.string() + ": manifest entry needs 'csv' and 'label'");
        std::filesystem::path csv = entry["csv"].get<std::string>();
        if (csv.is_relative()) csv = base / csv;
        if (!std::filesystem::exists(csv))
            throw ConfigError("manifest references missing file: " + csv.string());
        std::vector<std::string> channels;
        if (entry.contains("channels")) channels = entry["channels"].get<std::vector<std::string>>();
        data.push_back(load_csv_record(csv, entry["label"].get<int>(), channels));
    }
    return data;
}

void write_csv_record(const std::filesystem::path& csv_path, const SignalRecord& rec) {
    std::ofstream out(csv_path);
    if (!out) throw ConfigError("cannot write CSV file: " + csv_path.string());
    out.precision(17);
    int m = rec.num_channels(), L = rec.length();
    for (int c = 0; c < m; ++c) out << (c ? "," : "") << "ch" << c;
    out << "\n";
    for (int i = 0; i < L; ++i) {
        for (int c = 0; c < m; ++c) out << (c ? "," : "") << rec.channels.at(c, i);
        out << "\n";
    }
    if (!out) throw ConfigError("write failed: " + csv_path.string());
}

std::filesystem::path write_dataset(const std::filesystem::path& out_dir, const Dataset& data) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json manifest = nlohmann::json::array();
    std::map<int, int> per_class;
    for (const SignalRecord& rec : data) {
        int idx = per_class[rec.label]++;
        std::string name = "class" + std::to_string(rec.label) + "_rec" + std::to_string(idx) + ".csv";
        write_csv_record(out_dir / name, rec);
        nlohmann::json entry;
        entry["csv"] = name;
        entry["label"] = rec.label;
        nlohmann::json chans = nlohmann::json::array();
        for (int c = 0; c < rec.num_channels(); ++c) chans.push_back("ch" + std::to_string(c));
        entry["channels"] = chans;
        manifest.push_back(std::move(entry));
    }
    std::filesystem::path mpath = out_dir / "manifest.json";
    std::ofstream out(mpath);
    if (!out) throw ConfigError("cannot write manifest: " + mpath.string());
    out << manifest.dump(2) << "\n";
    return mpath;
}

}  // namespace graphio
