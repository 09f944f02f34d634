#include "stssdl/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace stssdl {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError("config: key '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

RunConfig RunConfig::parse_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto set_double = [](double& dst) {
        return [&dst](const std::string& v, const std::string& key) {
            try {
                std::size_t used = 0;
                dst = std::stod(v, &used);
                if (used != v.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError("config: key '" + key + "' expects a number, got '" + v + "'");
            }
        };
    };
    auto set_size = [](std::size_t& dst) {
        return [&dst](const std::string& v, const std::string& key) {
            try {
                std::size_t used = 0;
                const long long parsed = std::stoll(v, &used);
                if (used != v.size() || parsed < 0) throw std::invalid_argument("range");
                dst = static_cast<std::size_t>(parsed);
            } catch (const std::exception&) {
                throw ParseError("config: key '" + key + "' expects a non-negative integer, got '" +
                                 v + "'");
            }
        };
    };

    std::map<std::string, Setter> setters;
    setters["data"] = [&cfg](const std::string& v, const std::string&) { cfg.data = v; };
    setters["out_dir"] = [&cfg](const std::string& v, const std::string&) { cfg.out_dir = v; };
    setters["split_train"] = set_double(cfg.split_train);
    setters["split_val"] = set_double(cfg.split_val);
    setters["split_test"] = set_double(cfg.split_test);
    setters["seed"] = [&cfg](const std::string& v, const std::string& key) {
        try {
            std::size_t used = 0;
            cfg.seed = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("config: key '" + key + "' expects an integer, got '" + v + "'");
        }
    };
    setters["batch_size"] = set_size(cfg.batch_size);
    setters["epochs"] = set_size(cfg.epochs);
    setters["patience"] = set_size(cfg.patience);
    setters["lr"] = set_double(cfg.lr);
    setters["input_len"] = set_size(cfg.model.input_len);
    setters["horizon"] = set_size(cfg.model.horizon);
    setters["hidden"] = set_size(cfg.model.hidden);
    setters["query_dim"] = set_size(cfg.model.query_dim);
    setters["prototypes"] = set_size(cfg.model.prototype_count);
    setters["cheb_order"] = [&cfg](const std::string& v, const std::string& key) {
        try {
            std::size_t used = 0;
            cfg.model.cheb_order = std::stoi(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("config: key '" + key + "' expects an integer, got '" + v + "'");
        }
    };
    setters["enc_layers"] = set_size(cfg.model.enc_layers);
    setters["dec_layers"] = set_size(cfg.model.dec_layers);
    setters["e_input"] = set_size(cfg.model.e_input);
    setters["e_node"] = set_size(cfg.model.e_node);
    setters["e_tod"] = set_size(cfg.model.e_tod);
    setters["e_graph"] = set_size(cfg.model.e_graph);
    setters["margin"] = set_double(cfg.model.margin);
    setters["lambda_con"] = set_double(cfg.model.lambda_con);
    setters["lambda_dev"] = set_double(cfg.model.lambda_dev);
    setters["share_query_proj"] = [&cfg](const std::string& v, const std::string& key) {
        cfg.model.share_query_proj = parse_bool(v, key);
    };
    setters["disable_stopgrad"] = [&cfg](const std::string& v, const std::string& key) {
        cfg.model.disable_stopgrad = parse_bool(v, key);
    };
    setters["variant"] = [&cfg](const std::string& v, const std::string&) {
        cfg.model.variant = parse_variant(v);
    };

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ": line " + std::to_string(line_no) +
                             ": expected 'key = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw ParseError(origin + ": line " + std::to_string(line_no) + ": unknown key '" +
                             key + "'");
        }
        if (!seen.insert(key).second) {
            throw ParseError(origin + ": line " + std::to_string(line_no) + ": duplicate key '" +
                             key + "'");
        }
        it->second(value, key);
    }
    return cfg;
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "data = " << data << "\n";
    if (!out_dir.empty()) os << "out_dir = " << out_dir << "\n";
    os << "split_train = " << fmt(split_train) << "\n";
    os << "split_val = " << fmt(split_val) << "\n";
    os << "split_test = " << fmt(split_test) << "\n";
    os << "seed = " << seed << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "epochs = " << epochs << "\n";
    os << "patience = " << patience << "\n";
    os << "lr = " << fmt(lr) << "\n";
    os << "input_len = " << model.input_len << "\n";
    os << "horizon = " << model.horizon << "\n";
    os << "hidden = " << model.hidden << "\n";
    os << "query_dim = " << model.query_dim << "\n";
    os << "prototypes = " << model.prototype_count << "\n";
    os << "cheb_order = " << model.cheb_order << "\n";
    os << "enc_layers = " << model.enc_layers << "\n";
    os << "dec_layers = " << model.dec_layers << "\n";
    os << "e_input = " << model.e_input << "\n";
    os << "e_node = " << model.e_node << "\n";
    os << "e_tod = " << model.e_tod << "\n";
    os << "e_graph = " << model.e_graph << "\n";
    os << "margin = " << fmt(model.margin) << "\n";
    os << "lambda_con = " << fmt(model.lambda_con) << "\n";
    os << "lambda_dev = " << fmt(model.lambda_dev) << "\n";
    os << "share_query_proj = " << (model.share_query_proj ? "true" : "false") << "\n";
    os << "disable_stopgrad = " << (model.disable_stopgrad ? "true" : "false") << "\n";
    os << "variant = " << variant_name(model.variant) << "\n";
    return os.str();
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write config file " + path);
    out << to_text();
}

}  // namespace stssdl
