#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "omr/notation.hpp"
#include "omr/vocab.hpp"

namespace omr {

struct XmlError : std::runtime_error {
    int line;
    XmlError(int line_, const std::string& what_)
        : std::runtime_error("XML parse error at line " + std::to_string(line_) + ": " +
                             what_),
          line(line_) {}
};

struct XmlElement {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<XmlElement> children;
    std::string text;  // concatenated character data directly inside this element

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes)
            if (k == key) return &v;
        return nullptr;
    }

    const XmlElement* child(std::string_view tag) const {
        for (const auto& c : children)
            if (c.name == tag) return &c;
        return nullptr;
    }
};

namespace detail {

// Minimal strict XML reader: prolog, comments, CDATA, elements, attributes,
// character data, the five predefined entities. Enough for MuNG documents;
// anything outside that subset is a hard error with a line number.
class XmlReader {
  public:
    explicit XmlReader(std::string_view text) : text_(text) {}

    XmlElement parse_document() {
        skip_misc();
        if (eof()) fail("document has no root element");
        XmlElement root = parse_element();
        skip_misc();
        if (!eof()) fail("content after root element");
        return root;
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;

    [[noreturn]] void fail(const std::string& msg) const { throw XmlError(line_, msg); }

    bool eof() const { return pos_ >= text_.size(); }

    char peek() const { return text_[pos_]; }

    char take() {
        const char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    bool starts_with(std::string_view s) const {
        return text_.substr(pos_, s.size()) == s;
    }

    void expect(char c) {
        if (eof() || peek() != c)
            fail(std::string("expected '") + c + "'");
        take();
    }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) take();
    }

    void skip_until(std::string_view terminator, const char* what) {
        while (!eof()) {
            if (starts_with(terminator)) {
                for (std::size_t i = 0; i < terminator.size(); ++i) take();
                return;
            }
            take();
        }
        fail(std::string("unterminated ") + what);
    }

    // Whitespace, comments, processing instructions, DOCTYPE.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts_with("<!--")) {
                skip_until("-->", "comment");
            } else if (starts_with("<?")) {
                skip_until("?>", "processing instruction");
            } else if (starts_with("<!DOCTYPE")) {
                skip_until(">", "DOCTYPE");
            } else {
                return;
            }
        }
    }

    std::string parse_name() {
        const auto name_char = [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                   c == '.' || c == ':';
        };
        if (eof() || !name_char(peek())) fail("expected a name");
        std::string name;
        while (!eof() && name_char(peek())) name += take();
        return name;
    }

    void append_entity(std::string& out) {
        expect('&');
        std::string entity;
        while (!eof() && peek() != ';') {
            entity += take();
            if (entity.size() > 8) fail("unterminated entity reference");
        }
        expect(';');
        if (entity == "lt") out += '<';
        else if (entity == "gt") out += '>';
        else if (entity == "amp") out += '&';
        else if (entity == "quot") out += '"';
        else if (entity == "apos") out += '\'';
        else if (!entity.empty() && entity[0] == '#') {
            int code = 0;
            const char* begin = entity.data() + 1;
            const char* end = entity.data() + entity.size();
            std::from_chars_result r =
                (entity.size() > 1 && (entity[1] == 'x' || entity[1] == 'X'))
                    ? std::from_chars(begin + 1, end, code, 16)
                    : std::from_chars(begin, end, code, 10);
            if (r.ec != std::errc() || r.ptr != end || code <= 0 || code > 127)
                fail("unsupported character reference '&" + entity + ";'");
            out += static_cast<char>(code);
        } else {
            fail("unknown entity '&" + entity + ";'");
        }
    }

    std::string parse_attribute_value() {
        if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
        const char quote = take();
        std::string value;
        while (!eof() && peek() != quote) {
            if (peek() == '&') append_entity(value);
            else if (peek() == '<') fail("'<' in attribute value");
            else value += take();
        }
        expect(quote);
        return value;
    }

    XmlElement parse_element() {
        expect('<');
        XmlElement el;
        el.name = parse_name();
        for (;;) {
            skip_ws();
            if (eof()) fail("unterminated start tag <" + el.name + ">");
            if (peek() == '/') {
                take();
                expect('>');
                return el;  // self-closing
            }
            if (peek() == '>') {
                take();
                break;
            }
            std::string key = parse_name();
            skip_ws();
            expect('=');
            skip_ws();
            el.attributes.emplace_back(std::move(key), parse_attribute_value());
        }
        // content
        for (;;) {
            if (eof()) fail("missing </" + el.name + ">");
            if (starts_with("</")) {
                take();
                take();
                std::string closing = parse_name();
                if (closing != el.name)
                    fail("mismatched closing tag </" + closing + ">, expected </" +
                         el.name + ">");
                skip_ws();
                expect('>');
                return el;
            }
            if (starts_with("<!--")) {
                skip_until("-->", "comment");
            } else if (starts_with("<![CDATA[")) {
                for (int i = 0; i < 9; ++i) take();
                while (!eof() && !starts_with("]]>")) el.text += take();
                skip_until("]]>", "CDATA section");
            } else if (peek() == '<') {
                el.children.push_back(parse_element());
            } else if (peek() == '&') {
                append_entity(el.text);
            } else {
                el.text += take();
            }
        }
    }
};

inline double parse_number_field(const std::string& value, const std::string& field,
                                 const std::string& context) {
    const std::string t = trim(value);
    double out = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw std::invalid_argument("MuNG: bad numeric value '" + value + "' for " + field +
                                    " in " + context);
    return out;
}

inline long long parse_id_field(const std::string& value, const std::string& context) {
    const std::string t = trim(value);
    long long out = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw std::invalid_argument("MuNG: bad id '" + value + "' in " + context);
    return out;
}

// Field lookup that accepts both MuNG layouts: <Node><Id>3</Id>...</Node>
// (v2.0 files) and <Node Id="3" .../> (attribute form).
inline const std::string* node_field(const XmlElement& node, std::string_view key,
                                     std::string& scratch) {
    if (const std::string* attr = node.attribute(key)) return attr;
    if (const XmlElement* child = node.child(key)) {
        scratch = child->text;
        return &scratch;
    }
    return nullptr;
}

}  // namespace detail

inline XmlElement parse_xml(std::string_view text) {
    return detail::XmlReader(text).parse_document();
}

// Parse one MuNG annotation document. Each <Node> yields a symbol; each
// Outlinks entry yields one undirected edge. Page size comes from optional
// width/height attributes on the root, else from the node extent.
inline NotationGraph parse_mung_document(std::string_view xml_text, const ClassVocab& vocab) {
    const XmlElement root = parse_xml(xml_text);
    if (root.name != "Nodes" && root.name != "CropObjectList")
        throw std::invalid_argument("MuNG: unexpected root element <" + root.name + ">");

    NotationGraph graph;
    if (const std::string* doc = root.attribute("document")) graph.document_id = *doc;

    const std::vector<XmlElement>* node_list = &root.children;
    if (root.name == "CropObjectList") {
        const XmlElement* inner = root.child("CropObjects");
        if (inner == nullptr)
            throw std::invalid_argument("MuNG: CropObjectList without <CropObjects>");
        node_list = &inner->children;
    }

    std::unordered_set<long long> seen_ids;
    std::vector<std::pair<long long, std::string>> outlinks;  // (source id, raw list)
    for (const XmlElement& el : *node_list) {
        if (el.name != "Node" && el.name != "CropObject") continue;
        std::string scratch;
        const auto field = [&](std::string_view key) -> const std::string* {
            return detail::node_field(el, key, scratch);
        };
        const auto required = [&](std::string_view key) -> const std::string& {
            const std::string* v = field(key);
            if (v == nullptr)
                throw std::invalid_argument("MuNG: <" + el.name + "> missing " +
                                            std::string(key));
            return *v;
        };

        GroundTruthNode node;
        node.id = detail::parse_id_field(required("Id"), "<Node>");
        const std::string context = "node " + std::to_string(node.id);
        if (!seen_ids.insert(node.id).second)
            throw std::invalid_argument("MuNG: duplicate node id " + std::to_string(node.id));

        const std::string class_name = trim(required("ClassName"));
        const auto class_id = vocab.find(class_name);
        if (!class_id)
            throw std::invalid_argument("MuNG: unknown class '" + class_name + "' on " +
                                        context);
        node.class_id = *class_id;

        const double top = detail::parse_number_field(required("Top"), "Top", context);
        const double left = detail::parse_number_field(required("Left"), "Left", context);
        const double width = detail::parse_number_field(required("Width"), "Width", context);
        const double height =
            detail::parse_number_field(required("Height"), "Height", context);
        if (!(width > 0.0) || !(height > 0.0))
            throw std::invalid_argument("MuNG: nonpositive box size on " + context);
        if (top < 0.0 || left < 0.0)
            throw std::invalid_argument("MuNG: negative box position on " + context);
        node.bbox = BBox{top, left, top + height, left + width};

        if (const std::string* links = field("Outlinks")) {
            const std::string raw = trim(*links);
            if (!raw.empty()) outlinks.emplace_back(node.id, raw);
        }
        graph.nodes.push_back(node);
    }

    for (const auto& [source, raw] : outlinks) {
        std::size_t start = 0;
        while (start < raw.size()) {
            std::size_t end = raw.find_first_of(" \t", start);
            if (end == std::string::npos) end = raw.size();
            if (end > start) {
                const long long target = detail::parse_id_field(
                    raw.substr(start, end - start), "Outlinks of node " + std::to_string(source));
                if (target == source)
                    throw std::invalid_argument("MuNG: self-link on node " +
                                                std::to_string(source));
                if (!seen_ids.count(target))
                    throw std::invalid_argument("MuNG: node " + std::to_string(source) +
                                                " links to missing node " +
                                                std::to_string(target));
                graph.edges.emplace_back(source, target);
            }
            start = end + 1;
        }
    }
    graph.canonicalize_edges();

    double width = 0.0, height = 0.0;
    if (const std::string* w = root.attribute("width"))
        width = detail::parse_number_field(*w, "width", "<Nodes>");
    if (const std::string* h = root.attribute("height"))
        height = detail::parse_number_field(*h, "height", "<Nodes>");
    if (width <= 0.0 || height <= 0.0) {
        for (const auto& n : graph.nodes) {
            width = std::max(width, n.bbox.right);
            height = std::max(height, n.bbox.bottom);
        }
    }
    graph.page_width = width;
    graph.page_height = height;
    return graph;
}

}  // namespace omr
