// Parser and writer for the scenario configuration text format.
//
//   [hot]                 # one section per ensemble
//   n_sites = 2
//   omega = 1.5
//   g = 0.5, 0.55
//   temperature = 2.0
//   [interaction]
//   variant = pairwise    # none | pairwise | all_to_all
//   omega_vector = 0.1, 0.1
//   omega_matrix = 0.1 0.1; 0.1 0.1
//   [run]
//   mode = common         # common | cascaded | independent
//   tau = 0.02, 0.04
//   grid = 0.1:3.5:0.02
//   scenarios = com2, cas2
//   threads = 2
//   cascaded_time = sweep # sweep | substeps
//
// Unknown keys and sections are hard errors carrying the offending line.

#include "qtm/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace qtm {

ConfigError::ConfigError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

using Section = std::map<std::string, Entry>;

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& text, int line) {
    try {
        size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected a number, got '" + text + "'");
    }
}

int parse_int(const std::string& text, int line) {
    try {
        size_t pos = 0;
        const int v = std::stoi(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected an integer, got '" + text + "'");
    }
}

std::vector<double> parse_double_list(const std::string& text, int line) {
    std::vector<double> out;
    for (const auto& tok : split(text, ',')) {
        if (tok.empty()) throw ConfigError(line, "empty entry in number list");
        out.push_back(parse_double(tok, line));
    }
    return out;
}

// Rows separated by ';', entries by commas or whitespace.
RMatrix parse_matrix(const std::string& text, int line) {
    std::vector<std::vector<double>> rows;
    for (const auto& row_text : split(text, ';')) {
        std::vector<double> row;
        std::istringstream is(row_text);
        std::string tok;
        while (is >> tok) {
            while (!tok.empty() && tok.back() == ',') tok.pop_back();
            if (tok.empty()) continue;
            row.push_back(parse_double(tok, line));
        }
        if (row.empty()) throw ConfigError(line, "empty matrix row");
        rows.push_back(std::move(row));
    }
    const size_t cols = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != cols) throw ConfigError(line, "ragged matrix rows");
    RMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

bool key_known(const std::string& section, const std::string& key) {
    if (section == "hot" || section == "cold")
        return key == "n_sites" || key == "omega" || key == "g" || key == "temperature";
    if (section == "interaction")
        return key == "variant" || key == "omega_vector" || key == "omega_matrix";
    if (section == "run")
        return key == "mode" || key == "cascaded_time" || key == "tau" || key == "grid" ||
               key == "scenarios" || key == "threads";
    return false;
}

class Document {
  public:
    explicit Document(const std::string& text) {
        std::istringstream is(text);
        std::string raw;
        int line_no = 0;
        std::string section;
        int section_line = 0;
        while (std::getline(is, raw)) {
            ++line_no;
            std::string line = raw;
            if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(line_no, "malformed section header '" + line + "'");
                section = trim(line.substr(1, line.size() - 2));
                section_line = line_no;
                if (section != "hot" && section != "cold" && section != "interaction" &&
                    section != "run")
                    throw ConfigError(line_no, "unknown section [" + section + "]");
                if (sections_.count(section))
                    throw ConfigError(line_no, "duplicate section [" + section + "]");
                sections_[section] = {};
                section_lines_[section] = section_line;
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
            if (section.empty())
                throw ConfigError(line_no, "key outside of any section");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(line_no, "empty key");
            if (!key_known(section, key))
                throw ConfigError(line_no, "unknown key '" + key + "' in [" + section + "]");
            auto& sec = sections_[section];
            if (sec.count(key))
                throw ConfigError(line_no, "duplicate key '" + key + "' in [" + section + "]");
            sec[key] = Entry{value, line_no, false};
        }
    }

    bool has_section(const std::string& name) const { return sections_.count(name) > 0; }

    Entry* find(const std::string& section, const std::string& key) {
        auto sit = sections_.find(section);
        if (sit == sections_.end()) return nullptr;
        auto kit = sit->second.find(key);
        if (kit == sit->second.end()) return nullptr;
        kit->second.used = true;
        return &kit->second;
    }

    Entry& require(const std::string& section, const std::string& key) {
        Entry* e = find(section, key);
        if (!e)
            throw ConfigError(section_lines_.count(section) ? section_lines_.at(section) : 0,
                              "missing key '" + key + "' in [" + section + "]");
        return *e;
    }

    void reject_unused() const {
        for (const auto& [section, entries] : sections_)
            for (const auto& [key, entry] : entries)
                if (!entry.used)
                    throw ConfigError(entry.line,
                                      "unknown key '" + key + "' in [" + section + "]");
    }

  private:
    std::map<std::string, Section> sections_;
    std::map<std::string, int> section_lines_;
};

EnsembleSpec parse_ensemble(Document& doc, const std::string& name) {
    EnsembleSpec e;
    e.n_sites = parse_int(doc.require(name, "n_sites").value, doc.require(name, "n_sites").line);
    const Entry& om = doc.require(name, "omega");
    e.omega = parse_double(om.value, om.line);
    const Entry& gs = doc.require(name, "g");
    const auto glist = parse_double_list(gs.value, gs.line);
    e.g = Eigen::Map<const RVector>(glist.data(), static_cast<Eigen::Index>(glist.size()));
    const Entry& temp = doc.require(name, "temperature");
    e.temperature = parse_double(temp.value, temp.line);
    return e;
}

}  // namespace

ParsedConfig parse_config(const std::string& text) {
    Document doc(text);

    if (!doc.has_section("hot"))
        throw ConfigError(1, "missing ensemble section [hot]");
    if (!doc.has_section("cold"))
        throw ConfigError(1, "missing ensemble section [cold]");

    ParsedConfig out;
    out.scenario.hot = parse_ensemble(doc, "hot");
    out.scenario.cold = parse_ensemble(doc, "cold");

    if (doc.has_section("interaction")) {
        const Entry& variant = doc.require("interaction", "variant");
        if (variant.value == "none") {
            out.scenario.interaction = InteractionSpec::none();
        } else if (variant.value == "pairwise") {
            const Entry& vec = doc.require("interaction", "omega_vector");
            const auto vals = parse_double_list(vec.value, vec.line);
            out.scenario.interaction = InteractionSpec::pairwise(
                Eigen::Map<const RVector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
            if (Entry* m = doc.find("interaction", "omega_matrix"))
                out.scenario.interaction.omega_matrix = parse_matrix(m->value, m->line);
        } else if (variant.value == "all_to_all") {
            const Entry& mat = doc.require("interaction", "omega_matrix");
            out.scenario.interaction =
                InteractionSpec::all_to_all(parse_matrix(mat.value, mat.line));
            if (Entry* v = doc.find("interaction", "omega_vector")) {
                const auto vals = parse_double_list(v->value, v->line);
                out.scenario.interaction.omega_vector = Eigen::Map<const RVector>(
                    vals.data(), static_cast<Eigen::Index>(vals.size()));
            }
        } else {
            throw ConfigError(variant.line, "unknown interaction variant '" + variant.value +
                                                "' (expected none, pairwise or all_to_all)");
        }
    }

    if (doc.has_section("run")) {
        if (Entry* mode = doc.find("run", "mode")) {
            if (mode->value == "common")
                out.scenario.mode = DissipationMode::Common;
            else if (mode->value == "cascaded")
                out.scenario.mode = DissipationMode::Cascaded;
            else if (mode->value == "independent")
                out.scenario.mode = DissipationMode::Independent;
            else
                throw ConfigError(mode->line, "unknown mode '" + mode->value +
                                                  "' (expected common, cascaded or independent)");
        }
        if (Entry* ct = doc.find("run", "cascaded_time")) {
            if (ct->value == "sweep")
                out.scenario.cascaded_timing = CascadedTiming::PerSweep;
            else if (ct->value == "substeps")
                out.scenario.cascaded_timing = CascadedTiming::SubstepSum;
            else
                throw ConfigError(ct->line, "unknown cascaded_time '" + ct->value +
                                                "' (expected sweep or substeps)");
        }
        if (Entry* tau = doc.find("run", "tau")) {
            out.run.taus = parse_double_list(tau->value, tau->line);
            for (double t : out.run.taus)
                if (!(t > 0.0)) throw ConfigError(tau->line, "tau values must be > 0");
        }
        if (Entry* grid = doc.find("run", "grid")) {
            const auto parts = split(grid->value, ':');
            if (parts.size() != 3)
                throw ConfigError(grid->line, "grid must be lo:hi:step");
            out.run.grid_lo = parse_double(parts[0], grid->line);
            out.run.grid_hi = parse_double(parts[1], grid->line);
            out.run.grid_step = parse_double(parts[2], grid->line);
            if (!(*out.run.grid_step > 0.0) || !(*out.run.grid_hi >= *out.run.grid_lo))
                throw ConfigError(grid->line, "grid must satisfy lo <= hi and step > 0");
        }
        if (Entry* sc = doc.find("run", "scenarios")) {
            for (const auto& tag : split(sc->value, ',')) {
                static const std::vector<std::string> known = {"com1", "com2", "cas1",
                                                               "cas2", "ind1", "ind2"};
                if (std::find(known.begin(), known.end(), tag) == known.end())
                    throw ConfigError(sc->line, "unknown scenario tag '" + tag + "'");
                out.run.scenarios.push_back(tag);
            }
        }
        if (Entry* th = doc.find("run", "threads")) {
            out.run.threads = parse_int(th->value, th->line);
            if (out.run.threads < 0) throw ConfigError(th->line, "threads must be >= 0");
        }
    }

    doc.reject_unused();

    try {
        out.warnings = out.scenario.validate();
    } catch (const ScenarioError& err) {
        throw ConfigError(0, err.what());
    }
    return out;
}

ParsedConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void render_ensemble(std::ostringstream& os, const char* name, const EnsembleSpec& e) {
    os << "[" << name << "]\n";
    os << "n_sites = " << e.n_sites << "\n";
    os << "omega = " << format_number(e.omega) << "\n";
    os << "g = ";
    for (Eigen::Index k = 0; k < e.g.size(); ++k)
        os << (k ? ", " : "") << format_number(e.g(k));
    os << "\n";
    os << "temperature = " << format_number(e.temperature) << "\n";
}

}  // namespace

std::string render_config(const Scenario& s, const RunConfig* run) {
    std::ostringstream os;
    render_ensemble(os, "hot", s.hot);
    os << "\n";
    render_ensemble(os, "cold", s.cold);
    os << "\n[interaction]\n";
    os << "variant = " << to_string(s.interaction.kind) << "\n";
    if (s.interaction.omega_vector.size() > 0) {
        os << "omega_vector = ";
        for (Eigen::Index k = 0; k < s.interaction.omega_vector.size(); ++k)
            os << (k ? ", " : "") << format_number(s.interaction.omega_vector(k));
        os << "\n";
    }
    if (s.interaction.omega_matrix.size() > 0) {
        os << "omega_matrix = ";
        for (Eigen::Index i = 0; i < s.interaction.omega_matrix.rows(); ++i) {
            if (i) os << "; ";
            for (Eigen::Index j = 0; j < s.interaction.omega_matrix.cols(); ++j)
                os << (j ? " " : "") << format_number(s.interaction.omega_matrix(i, j));
        }
        os << "\n";
    }
    os << "\n[run]\n";
    os << "mode = " << to_string(s.mode) << "\n";
    if (s.cascaded_timing == CascadedTiming::SubstepSum) os << "cascaded_time = substeps\n";
    if (run) {
        if (!run->taus.empty()) {
            os << "tau = ";
            for (size_t k = 0; k < run->taus.size(); ++k)
                os << (k ? ", " : "") << format_number(run->taus[k]);
            os << "\n";
        }
        if (run->grid_lo && run->grid_hi && run->grid_step)
            os << "grid = " << format_number(*run->grid_lo) << ":" << format_number(*run->grid_hi)
               << ":" << format_number(*run->grid_step) << "\n";
        if (!run->scenarios.empty()) {
            os << "scenarios = ";
            for (size_t k = 0; k < run->scenarios.size(); ++k)
                os << (k ? ", " : "") << run->scenarios[k];
            os << "\n";
        }
        if (run->threads > 0) os << "threads = " << run->threads << "\n";
    }
    return os.str();
}

}  // namespace qtm
