#include "cpsched/lp_solver.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace cpsched::lp {

namespace {

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    (void)ec;
    return std::string(buf, end);
}

double parse_number(const std::string& token, std::size_t line) {
    if (token == "inf") return kInfinity;
    if (token == "-inf") return -kInfinity;
    double v = 0.0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || end != token.data() + token.size())
        throw std::runtime_error("LP text line " + std::to_string(line) + ": bad number '" +
                                 token + "'");
    return v;
}

std::string encode_name(const std::string& name) {
    if (name.empty()) return "~";
    for (char c : name)
        if (std::isspace(static_cast<unsigned char>(c)))
            throw std::invalid_argument("LP names may not contain whitespace: '" + name + "'");
    return name;
}

std::string decode_name(const std::string& token) { return token == "~" ? std::string{} : token; }

const char* relation_token(Relation r) {
    switch (r) {
        case Relation::LessEqual: return "<=";
        case Relation::GreaterEqual: return ">=";
        case Relation::Equal: return "=";
    }
    return "?";
}

}  // namespace

void dump(const LinearProgram& lp, std::ostream& out) {
    lp.validate();
    out << "cpsched-lp 1\n";
    out << "variables " << lp.num_variables() << '\n';
    for (std::size_t j = 0; j < lp.num_variables(); ++j) {
        out << encode_name(lp.names[j]) << ' ' << format_number(lp.objective[j]) << ' '
            << format_number(lp.bounds[j].lower) << ' ' << format_number(lp.bounds[j].upper)
            << '\n';
    }
    out << "constraints " << lp.num_constraints() << '\n';
    for (const auto& row : lp.constraints) {
        std::size_t nnz = 0;
        for (double v : row.coeffs) nnz += v != 0.0;
        out << encode_name(row.name) << ' ' << relation_token(row.relation) << ' '
            << format_number(row.rhs) << ' ' << nnz;
        for (std::size_t j = 0; j < row.coeffs.size(); ++j)
            if (row.coeffs[j] != 0.0) out << ' ' << j << ':' << format_number(row.coeffs[j]);
        out << '\n';
    }
    out << "end\n";
}

LinearProgram restore(std::istream& in) {
    LinearProgram lp;
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::istringstream {
        if (!std::getline(in, line))
            throw std::runtime_error("LP text truncated after line " + std::to_string(line_no));
        ++line_no;
        return std::istringstream(line);
    };
    auto expect = [&](std::istringstream& s, const std::string& word) {
        std::string token;
        s >> token;
        if (token != word)
            throw std::runtime_error("LP text line " + std::to_string(line_no) + ": expected '" +
                                     word + "', got '" + token + "'");
    };

    {
        auto s = next_line();
        expect(s, "cpsched-lp");
        expect(s, "1");
    }
    std::size_t n = 0;
    {
        auto s = next_line();
        expect(s, "variables");
        s >> n;
    }
    for (std::size_t j = 0; j < n; ++j) {
        auto s = next_line();
        std::string name, cost, lo, hi;
        if (!(s >> name >> cost >> lo >> hi))
            throw std::runtime_error("LP text line " + std::to_string(line_no) +
                                     ": expected '<name> <cost> <lower> <upper>'");
        lp.add_variable(decode_name(name), parse_number(cost, line_no), parse_number(lo, line_no),
                        parse_number(hi, line_no));
    }
    std::size_t m = 0;
    {
        auto s = next_line();
        expect(s, "constraints");
        s >> m;
    }
    for (std::size_t i = 0; i < m; ++i) {
        auto s = next_line();
        std::string name, rel, rhs;
        std::size_t nnz = 0;
        if (!(s >> name >> rel >> rhs >> nnz))
            throw std::runtime_error("LP text line " + std::to_string(line_no) +
                                     ": expected '<name> <rel> <rhs> <nnz> ...'");
        Relation relation;
        if (rel == "<=")
            relation = Relation::LessEqual;
        else if (rel == ">=")
            relation = Relation::GreaterEqual;
        else if (rel == "=")
            relation = Relation::Equal;
        else
            throw std::runtime_error("LP text line " + std::to_string(line_no) +
                                     ": unknown relation '" + rel + "'");
        LinearProgram::Terms terms;
        for (std::size_t k = 0; k < nnz; ++k) {
            std::string entry;
            s >> entry;
            const auto colon = entry.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("LP text line " + std::to_string(line_no) +
                                         ": expected '<index>:<coef>'");
            terms.emplace_back(std::stoul(entry.substr(0, colon)),
                               parse_number(entry.substr(colon + 1), line_no));
        }
        lp.add_constraint(terms, relation, parse_number(rhs, line_no), decode_name(name));
    }
    {
        auto s = next_line();
        expect(s, "end");
    }
    return lp;
}

}  // namespace cpsched::lp
