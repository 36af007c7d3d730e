#include "qdflat/io.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace qdf::io {

namespace {

struct Lines {
    Lines(std::istream& i, std::string s) : in(i), source(std::move(s)) {}
    std::istream& in;
    std::string source;
    int line = 0;
    std::vector<std::string> tok;

    // next non-empty line split on whitespace; false at end of input
    bool next() {
        std::string s;
        while (std::getline(in, s)) {
            ++line;
            if (const auto h = s.find('#'); h != std::string::npos) s.resize(h);
            std::istringstream ss(s);
            tok.clear();
            for (std::string t; ss >> t;) tok.push_back(t);
            if (!tok.empty()) return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(source + ":" + std::to_string(line) + ": " + msg);
    }
    void want(std::size_t n, const char* what) const {
        if (tok.size() != n) fail(std::string("expected ") + what + " (" + std::to_string(n) + " fields), got " +
                                  std::to_string(tok.size()));
    }
    double num(std::size_t i) const {
        const char* s = tok[i].c_str();
        char* end = nullptr;
        const double v = std::strtod(s, &end);
        if (end == s || *end != '\0') fail("not a number: '" + tok[i] + "'");
        return v;
    }
    int integer(std::size_t i) const {
        const char* s = tok[i].c_str();
        char* end = nullptr;
        const long v = std::strtol(s, &end, 10);
        if (end == s || *end != '\0') fail("not an integer: '" + tok[i] + "'");
        return static_cast<int>(v);
    }
    bool flag(std::size_t i) const {
        const int v = integer(i);
        if (v != 0 && v != 1) fail("flag must be 0 or 1, got '" + tok[i] + "'");
        return v == 1;
    }
};

std::ifstream open(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open '" + path + "'");
    return f;
}

std::string num17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << (v == 0.0 ? 0.0 : v);
    return os.str();
}

}  // namespace

RationalQD parse_differential(std::istream& in, const std::string& source) {
    Lines L{in, source};
    RationalQD q;
    bool header = false;
    while (L.next()) {
        if (L.tok[0] == "scale") {
            L.want(3, "scale re im");
            if (header) L.fail("second scale line");
            q.scale = {L.num(1), L.num(2)};
            if (q.scale == cplx{}) L.fail("scale must be nonzero");
            header = true;
        } else if (L.tok[0] == "infinity") {
            L.want(2, "infinity marked");
            q.infinityMarked = L.flag(1);
        } else {
            if (!header) L.fail("missing 'scale re im' header before the first record");
            L.want(4, "re im order marked");
            SingularityRecord s{{L.num(0), L.num(1)}, L.integer(2), L.flag(3)};
            if (s.order < -1) L.fail("order must be >= -1");
            q.sing.push_back(s);
        }
    }
    if (!header) throw Error(source + ": missing 'scale re im' header");
    return q;
}

RationalQD read_differential(const std::string& path) {
    auto f = open(path);
    return parse_differential(f, path);
}

std::string format_differential(const RationalQD& q) {
    std::ostringstream os;
    os << "scale " << num17(q.scale.real()) << ' ' << num17(q.scale.imag()) << '\n';
    for (const auto& s : q.sing)
        os << num17(s.z.real()) << ' ' << num17(s.z.imag()) << ' ' << s.order << ' ' << (s.marked ? 1 : 0) << '\n';
    if (q.infinityMarked) os << "infinity 1\n";
    return os.str();
}

ClusterFamily parse_family(std::istream& in, const std::string& source) {
    Lines L{in, source};
    ClusterFamily f;
    while (L.next()) {
        const std::string& k = L.tok[0];
        if (k == "scale") {
            L.want(3, "scale re im");
            f.scale = {L.num(1), L.num(2)};
        } else if (k == "center") {
            L.want(3, "center re im");
            f.center = {L.num(1), L.num(2)};
        } else if (k == "compare") {
            L.want(2, "compare factor");
            f.compareFactor = L.num(1);
            if (!(f.compareFactor > 0.0) || f.compareFactor == 1.0) L.fail("compare factor must be positive and != 1");
        } else {
            L.want(5, "re im order marked cluster");
            FamilyPoint p{{L.num(0), L.num(1)}, L.integer(2), L.flag(3), L.flag(4)};
            if (p.order < -1) L.fail("order must be >= -1");
            f.pts.push_back(p);
        }
    }
    if (f.colliding().empty()) throw Error(source + ": family has no cluster points");
    return f;
}

ClusterFamily read_family(const std::string& path) {
    auto f = open(path);
    return parse_family(f, path);
}

std::vector<cplx> parse_contour(std::istream& in, const std::string& source) {
    Lines L{in, source};
    std::vector<cplx> v;
    while (L.next()) {
        L.want(2, "re im");
        v.emplace_back(L.num(0), L.num(1));
    }
    if (v.size() < 2) throw Error(source + ": a contour needs at least two vertices");
    return v;
}

std::vector<cplx> read_contour(const std::string& path) {
    auto f = open(path);
    return parse_contour(f, path);
}

PolygonSpec parse_polygons(std::istream& in, const std::string& source) {
    Lines L{in, source};
    PolygonSpec spec;
    bool inPoly = false;
    while (L.next()) {
        if (L.tok[0] == "polygon") {
            L.want(1, "polygon");
            if (inPoly) L.fail("'polygon' inside an open polygon");
            spec.polygons.emplace_back();
            inPoly = true;
        } else if (L.tok[0] == "end") {
            if (!inPoly) L.fail("'end' without 'polygon'");
            if (spec.polygons.back().v.size() < 3) L.fail("polygon with fewer than three vertices");
            inPoly = false;
        } else if (inPoly) {
            L.want(2, "re im");
            spec.polygons.back().v.emplace_back(L.num(0), L.num(1));
        } else {
            // (pA,eA) <-> (pB,eB) sign; parentheses and commas are separators
            std::string joined;
            for (const auto& t : L.tok) joined += t + ' ';
            for (char& c : joined)
                if (c == '(' || c == ')' || c == ',') c = ' ';
            std::istringstream ss(joined);
            std::vector<std::string> parts;
            for (std::string t; ss >> t;) parts.push_back(t);
            if (parts.size() != 6 || parts[2] != "<->") L.fail("expected '(poly,edge) <-> (poly,edge) sign'");
            L.tok = {parts[0], parts[1], parts[3], parts[4], parts[5]};
            Gluing g{L.integer(0), L.integer(1), L.integer(2), L.integer(3), L.integer(4)};
            if (g.sign != 1 && g.sign != -1) L.fail("gluing sign must be +1 or -1");
            const int np = static_cast<int>(spec.polygons.size());
            if (g.polyA < 0 || g.polyA >= np || g.polyB < 0 || g.polyB >= np) L.fail("gluing names an unknown polygon");
            if (g.edgeA < 0 || g.edgeA >= static_cast<int>(spec.polygons[g.polyA].v.size()) || g.edgeB < 0 ||
                g.edgeB >= static_cast<int>(spec.polygons[g.polyB].v.size()))
                L.fail("gluing names an unknown edge");
            spec.gluings.push_back(g);
        }
    }
    if (inPoly) throw Error(source + ": unterminated polygon");
    if (spec.polygons.empty()) throw Error(source + ": no polygons");
    return spec;
}

PolygonSpec read_polygons(const std::string& path) {
    auto f = open(path);
    return parse_polygons(f, path);
}

NRRP parse_nrrp(std::istream& in, const std::string& source) {
    Lines L{in, source};
    NRRP P;
    while (L.next()) {
        const std::string& k = L.tok[0];
        if (k == "center") {
            L.want(3, "center re im");
            P.center = {L.num(1), L.num(2)};
        } else if (k == "side") {
            L.want(4, "side dir_re dir_im length");
            NrrpSide s;
            s.dir = {L.num(1), L.num(2)};
            s.length = L.num(3);
            if (!(s.length > 0.0)) L.fail("side length must be positive");
            P.sides.push_back(s);
        } else if (k == "interior") {
            L.want(7, "interior re im order marked ratio_re ratio_im");
            SingularityRecord s{{L.num(1), L.num(2)}, L.integer(3), L.flag(4)};
            P.interior.push_back(static_cast<int>(P.interiorSing.size()));
            P.interiorSing.push_back(s);
            P.interiorRatio.emplace_back(L.num(5), L.num(6));
            P.m += s.order;
        } else {
            L.fail("unknown record '" + k + "'");
        }
    }
    if (P.sides.size() < 3) throw Error(source + ": an NRRP file needs at least three sides");
    P.degenerate = P.interiorSing.empty();
    return P;
}

NRRP read_nrrp(const std::string& path) {
    auto f = open(path);
    return parse_nrrp(f, path);
}

std::string format_nrrp(const NRRP& P) {
    std::ostringstream os;
    os << "center " << num17(P.center.real()) << ' ' << num17(P.center.imag()) << '\n';
    for (const auto& s : P.sides)
        os << "side " << num17(s.dir.real()) << ' ' << num17(s.dir.imag()) << ' ' << num17(s.length) << '\n';
    for (std::size_t j = 0; j < P.interiorSing.size(); ++j) {
        const auto& s = P.interiorSing[j];
        os << "interior " << num17(s.z.real()) << ' ' << num17(s.z.imag()) << ' ' << s.order << ' '
           << (s.marked ? 1 : 0) << ' ' << num17(P.interiorRatio[j].real()) << ' '
           << num17(P.interiorRatio[j].imag()) << '\n';
    }
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
    if (!f) throw Error("write failed for '" + path + "'");
}

}  // namespace qdf::io
