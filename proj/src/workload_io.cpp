#include "chiron/workload_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace chiron {

namespace {

using nlohmann::json;

std::string to_hex(const std::vector<std::uint8_t>& bytes)
{
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& text)
{
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        return -1;
    };
    if (text.size() % 2 != 0)
        throw std::runtime_error("payload_hex has odd length");
    std::vector<std::uint8_t> out(text.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(text[2 * i]);
        int lo = nibble(text[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw std::runtime_error("payload_hex has a non-hex character");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

json txn_to_json(const Transaction& txn)
{
    json steps = json::array();
    for (const auto& step : txn.steps) {
        switch (step.kind) {
        case StepKind::Read:
            steps.push_back({{"op", "r"}, {"key", step.key}});
            break;
        case StepKind::Write:
            steps.push_back({{"op", "w"}, {"key", step.key}});
            break;
        case StepKind::Compute:
            steps.push_back({{"op", "c"}, {"gas", step.gas}});
            break;
        }
    }
    return json{{"index", txn.index},
                {"steps", std::move(steps)},
                {"payload_hex", to_hex(txn.payload)},
                {"sig_valid", txn.signature.valid}};
}

[[noreturn]] void line_error(std::size_t line_no, const std::string& what)
{
    throw std::runtime_error("workload file line " + std::to_string(line_no) + ": " + what);
}

std::uint64_t line_u64(const json& j, std::size_t line_no, const char* field)
{
    if (!j.contains(field) || !j[field].is_number_unsigned())
        line_error(line_no, std::string(field) + " must be an unsigned integer");
    return j[field].get<std::uint64_t>();
}

Transaction txn_from_json(const json& j, std::size_t line_no)
{
    for (const auto& [key, value] : j.items())
        if (key != "index" && key != "steps" && key != "payload_hex" && key != "sig_valid")
            line_error(line_no, "unknown transaction field \"" + key + "\"");
    Transaction txn;
    txn.index = static_cast<TxnIndex>(line_u64(j, line_no, "index"));
    if (!j.contains("payload_hex") || !j["payload_hex"].is_string())
        line_error(line_no, "payload_hex must be a string");
    try {
        txn.payload = from_hex(j["payload_hex"].get<std::string>());
    } catch (const std::runtime_error& e) {
        line_error(line_no, e.what());
    }
    if (!j.contains("sig_valid") || !j["sig_valid"].is_boolean())
        line_error(line_no, "sig_valid must be a boolean");
    bool valid = j["sig_valid"].get<bool>();
    if (!j.contains("steps") || !j["steps"].is_array())
        line_error(line_no, "steps must be an array");
    for (const auto& s : j["steps"]) {
        if (!s.is_object() || !s.contains("op") || !s["op"].is_string())
            line_error(line_no, "every step needs a string op");
        std::string op = s["op"].get<std::string>();
        if (op == "r" || op == "w") {
            if (!s.contains("key") || !s["key"].is_string() || s.size() != 2)
                line_error(line_no, "step op \"" + op + "\" takes exactly a key");
            txn.steps.push_back(op == "r" ? TxnStep::read(s["key"].get<std::string>())
                                          : TxnStep::write(s["key"].get<std::string>()));
        } else if (op == "c") {
            if (!s.contains("gas") || s.size() != 2)
                line_error(line_no, "step op \"c\" takes exactly a gas amount");
            std::uint64_t gas = line_u64(s, line_no, "gas");
            txn.declared_gas += gas;
            txn.steps.push_back(TxnStep::compute(gas));
        } else {
            line_error(line_no, "unknown step op \"" + op + "\"");
        }
    }
    txn.signature = SignatureStamp::over(txn.payload, valid);
    return txn;
}

[[noreturn]] void spec_error(const std::string& what)
{
    throw std::runtime_error("workload spec: " + what);
}

double spec_number(const json& j, const char* field)
{
    if (!j.is_number())
        spec_error(std::string(field) + " must be a number");
    return j.get<double>();
}

} // namespace

void write_blocks_jsonl(const std::string& path, const std::vector<Block>& blocks)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& block : blocks) {
        out << json{{"block", block.height}, {"n", block.txns.size()}}.dump() << '\n';
        for (const auto& txn : block.txns)
            out << txn_to_json(txn).dump() << '\n';
    }
    if (!out)
        throw std::runtime_error("write to " + path + " failed");
}

std::vector<Block> read_blocks_jsonl(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::vector<Block> blocks;
    std::size_t remaining = 0; // txn lines still owed to the open block
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            line_error(line_no, "not valid JSON");
        if (!j.is_object())
            line_error(line_no, "expected a JSON object");
        if (j.contains("block")) {
            if (remaining != 0)
                line_error(line_no, "previous block is missing transactions");
            for (const auto& [key, value] : j.items())
                if (key != "block" && key != "n")
                    line_error(line_no, "unknown header field \"" + key + "\"");
            Block block;
            block.height = line_u64(j, line_no, "block");
            remaining = line_u64(j, line_no, "n");
            blocks.push_back(std::move(block));
        } else {
            if (blocks.empty() || remaining == 0)
                line_error(line_no, "transaction outside a block header");
            blocks.back().txns.push_back(txn_from_json(j, line_no));
            if (--remaining == 0) {
                try {
                    check_block(blocks.back());
                } catch (const std::invalid_argument& e) {
                    line_error(line_no, e.what());
                }
            }
        }
    }
    if (remaining != 0)
        throw std::runtime_error("workload file ends mid-block");
    return blocks;
}

std::string spec_to_json(const WorkloadSpec& spec)
{
    json tables = json::object();
    for (const auto& [role, table] : spec.tables) {
        json rows = json::array();
        for (const auto& row : table.rows)
            rows.push_back({{"accesses", row.accesses}, {"share", row.share}});
        tables[role] = std::move(rows);
    }
    json j{{"kind", to_string(spec.kind)},
           {"txns_per_block", spec.txns_per_block},
           {"seed", spec.seed},
           {"invalid_rate", spec.invalid_rate},
           {"tables", std::move(tables)}};
    if (spec.kind == WorkloadKind::Mixed)
        j["mixed"] = {{"write_set_mean", spec.mixed.write_set_mean},
                      {"write_set_max", spec.mixed.write_set_max},
                      {"gas_min", spec.mixed.gas_min},
                      {"gas_max", spec.mixed.gas_max},
                      {"read_prob", spec.mixed.read_prob},
                      {"target_critical_path", spec.mixed.target_critical_path}};
    return j.dump(2) + "\n";
}

WorkloadSpec spec_from_json_text(const std::string& text)
{
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        spec_error("not valid JSON");
    if (!j.is_object())
        spec_error("expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (key != "kind" && key != "txns_per_block" && key != "seed" && key != "invalid_rate"
            && key != "tables" && key != "mixed")
            spec_error("unknown field \"" + key + "\"");

    WorkloadSpec spec;
    if (!j.contains("kind") || !j["kind"].is_string())
        spec_error("kind must be a string");
    try {
        spec.kind = workload_kind_from_string(j["kind"].get<std::string>());
    } catch (const std::invalid_argument& e) {
        spec_error(e.what());
    }
    if (j.contains("txns_per_block")) {
        if (!j["txns_per_block"].is_number_unsigned())
            spec_error("txns_per_block must be an unsigned integer");
        spec.txns_per_block = j["txns_per_block"].get<std::uint32_t>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned())
            spec_error("seed must be an unsigned integer");
        spec.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("invalid_rate"))
        spec.invalid_rate = spec_number(j["invalid_rate"], "invalid_rate");

    if (!j.contains("tables") || !j["tables"].is_object())
        spec_error("tables must be an object of role -> rows");
    for (const auto& [role, rows] : j["tables"].items()) {
        if (!rows.is_array())
            spec_error("table \"" + role + "\" must be an array of rows");
        FrequencyTable table;
        for (const auto& row : rows) {
            if (!row.is_object() || !row.contains("accesses") || !row.contains("share")
                || row.size() != 2)
                spec_error("table \"" + role + "\" rows need exactly accesses and share");
            if (!row["accesses"].is_number_unsigned())
                spec_error("table \"" + role + "\": accesses must be an unsigned integer");
            table.rows.push_back({row["accesses"].get<std::uint64_t>(),
                                  spec_number(row["share"], "share")});
        }
        spec.tables[role] = std::move(table);
    }

    if (j.contains("mixed")) {
        const json& m = j["mixed"];
        if (!m.is_object())
            spec_error("mixed must be an object");
        for (const auto& [key, value] : m.items())
            if (key != "write_set_mean" && key != "write_set_max" && key != "gas_min"
                && key != "gas_max" && key != "read_prob" && key != "target_critical_path")
                spec_error("unknown mixed field \"" + key + "\"");
        if (m.contains("write_set_mean"))
            spec.mixed.write_set_mean = spec_number(m["write_set_mean"], "write_set_mean");
        if (m.contains("write_set_max")) {
            if (!m["write_set_max"].is_number_unsigned())
                spec_error("write_set_max must be an unsigned integer");
            spec.mixed.write_set_max = m["write_set_max"].get<std::uint32_t>();
        }
        if (m.contains("gas_min")) {
            if (!m["gas_min"].is_number_unsigned())
                spec_error("gas_min must be an unsigned integer");
            spec.mixed.gas_min = m["gas_min"].get<std::uint64_t>();
        }
        if (m.contains("gas_max")) {
            if (!m["gas_max"].is_number_unsigned())
                spec_error("gas_max must be an unsigned integer");
            spec.mixed.gas_max = m["gas_max"].get<std::uint64_t>();
        }
        if (m.contains("read_prob"))
            spec.mixed.read_prob = spec_number(m["read_prob"], "read_prob");
        if (m.contains("target_critical_path"))
            spec.mixed.target_critical_path
                = spec_number(m["target_critical_path"], "target_critical_path");
    }

    try {
        validate_spec(spec);
    } catch (const std::invalid_argument& e) {
        spec_error(e.what());
    }
    return spec;
}

void write_spec_file(const std::string& path, const WorkloadSpec& spec)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << spec_to_json(spec);
    if (!out)
        throw std::runtime_error("write to " + path + " failed");
}

WorkloadSpec read_spec_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return spec_from_json_text(buf.str());
}

} // namespace chiron
