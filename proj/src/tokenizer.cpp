#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include "forkscope/similarity.hpp"

namespace forkscope {

namespace {

// Sorted; the class of a keyword is 100 + its index.
constexpr std::array<std::string_view, 103> kKeywords{
    "_Bool",        "_Complex",     "alignas",      "alignof",     "and",          "and_eq",
    "asm",          "auto",         "bitand",       "bitor",       "bool",         "break",
    "case",         "catch",        "char",         "char16_t",    "char32_t",     "char8_t",
    "class",        "co_await",     "co_return",    "co_yield",    "compl",        "concept",
    "const",        "const_cast",   "consteval",    "constexpr",   "constinit",    "continue",
    "decltype",     "default",      "define",       "delete",      "do",           "double",
    "dynamic_cast", "elif",         "else",         "endif",       "enum",         "explicit",
    "export",       "extern",       "false",        "float",       "for",          "friend",
    "goto",         "if",           "ifdef",        "ifndef",      "include",      "inline",
    "int",          "long",         "mutable",      "namespace",   "new",          "noexcept",
    "not",          "not_eq",       "nullptr",      "operator",    "or",           "or_eq",
    "pragma",       "private",      "protected",    "public",      "register",     "reinterpret_cast",
    "requires",     "restrict",     "return",       "short",       "signed",       "sizeof",
    "static",       "static_assert", "static_cast", "struct",      "switch",       "template",
    "this",         "thread_local", "throw",        "true",        "try",          "typedef",
    "typeid",       "typename",     "undef",        "union",       "unsigned",     "using",
    "virtual",      "void",         "volatile",     "wchar_t",     "while",        "xor",
    "xor_eq",
};

struct OperatorSpec {
    std::string_view spelling;
    std::string_view name;
};

// Longest spellings first for maximal munch. The class is 300 + index.
constexpr std::array<OperatorSpec, 51> kOperators{{
    {"<<=", "OP_shl_assign"}, {">>=", "OP_shr_assign"}, {"<=>", "OP_spaceship"}, {"...", "ELLIPSIS"},
    {"->*", "OP_arrow_star"}, {"->", "OP_arrow"},       {"++", "OP_inc"},        {"--", "OP_dec"},
    {"<<", "OP_shl"},         {">>", "OP_shr"},         {"<=", "OP_le"},         {">=", "OP_ge"},
    {"==", "OP_eq"},          {"!=", "OP_ne"},          {"&&", "OP_and"},        {"||", "OP_or"},
    {"+=", "OP_add_assign"},  {"-=", "OP_sub_assign"},  {"*=", "OP_mul_assign"}, {"/=", "OP_div_assign"},
    {"%=", "OP_mod_assign"},  {"&=", "OP_and_assign"},  {"|=", "OP_or_assign"},  {"^=", "OP_xor_assign"},
    {"::", "OP_scope"},       {".*", "OP_dot_star"},    {"##", "HASHHASH"},      {"=", "OP_assign"},
    {";", "SEMI"},            {",", "COMMA"},           {"(", "LPAREN"},         {")", "RPAREN"},
    {"{", "LBRACE"},          {"}", "RBRACE"},          {"[", "LBRACKET"},       {"]", "RBRACKET"},
    {"+", "OP_plus"},         {"-", "OP_minus"},        {"*", "OP_star"},        {"/", "OP_slash"},
    {"%", "OP_mod"},          {"<", "OP_lt"},           {">", "OP_gt"},          {"!", "OP_not"},
    {"&", "OP_amp"},          {"|", "OP_pipe"},         {"^", "OP_xor"},         {"~", "OP_tilde"},
    {"?", "OP_question"},     {":", "OP_colon"},        {".", "OP_dot"},
}};
constexpr OperatorSpec kHash{"#", "HASH"};

constexpr TokenClass kKeywordBase = 100;
constexpr TokenClass kOperatorBase = 300;
constexpr TokenClass kHashClass = kOperatorBase + kOperators.size();
constexpr TokenClass kWordBit = TokenClass{1} << 63;

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

bool is_string_prefix(std::string_view w) {
    return w == "L" || w == "u" || w == "U" || w == "u8" || w == "R" || w == "LR" || w == "uR" || w == "UR" ||
           w == "u8R";
}

TokenClass fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h | kWordBit;
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    TokenStream run() {
        TokenStream out;
        while (pos_ < src_.size()) {
            unsigned char c = static_cast<unsigned char>(src_[pos_]);
            if (c == '\n') {
                ++line_;
                ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else if (starts_with("//")) {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else if (starts_with("/*")) {
                skip_block_comment();
            } else if (c == '"') {
                emit(out, tok::kStr);
                skip_quoted('"');
            } else if (c == '\'') {
                emit(out, tok::kChar);
                skip_quoted('\'');
            } else if (std::isdigit(c) || (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                emit(out, tok::kNum);
                skip_number();
            } else if (ident_start(c)) {
                lex_word(out);
            } else {
                lex_operator(out);
            }
        }
        return out;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    std::uint32_t line_ = 1;

    bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

    void emit(TokenStream& out, TokenClass t) {
        out.tokens.push_back(t);
        out.line_map.push_back(line_);
    }

    void advance_over(char c) {
        if (c == '\n') ++line_;
        ++pos_;
    }

    void skip_block_comment() {
        pos_ += 2;
        while (pos_ < src_.size() && !starts_with("*/")) advance_over(src_[pos_]);
        pos_ = std::min(src_.size(), pos_ + 2);
    }

    void skip_quoted(char quote) {
        ++pos_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                advance_over(c);
                advance_over(src_[pos_]);
                continue;
            }
            if (c == '\n') return;  // unterminated literal ends at the line
            ++pos_;
            if (c == quote) return;
        }
    }

    void skip_raw_string() {
        // R"delim( ... )delim"
        ++pos_;  // opening quote
        std::size_t open = src_.find('(', pos_);
        if (open == std::string_view::npos) {
            pos_ = src_.size();
            return;
        }
        std::string terminator = ")" + std::string(src_.substr(pos_, open - pos_)) + "\"";
        pos_ = open + 1;
        std::size_t end = src_.find(terminator, pos_);
        std::size_t stop = end == std::string_view::npos ? src_.size() : end + terminator.size();
        while (pos_ < stop) advance_over(src_[pos_]);
    }

    void skip_number() {
        while (pos_ < src_.size()) {
            unsigned char c = static_cast<unsigned char>(src_[pos_]);
            if (std::isalnum(c) || c == '.' || c == '_') {
                ++pos_;
            } else if (c == '\'' && pos_ + 1 < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_ + 1]))) {
                ++pos_;  // digit separator
            } else if ((c == '+' || c == '-') && pos_ > 0 &&
                       std::string_view("eEpP").find(src_[pos_ - 1]) != std::string_view::npos) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    void lex_word(TokenStream& out) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        std::string_view word = src_.substr(start, pos_ - start);
        if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'') && is_string_prefix(word)) {
            bool raw = word.back() == 'R' && src_[pos_] == '"';
            emit(out, src_[pos_] == '"' ? tok::kStr : tok::kChar);
            if (raw) skip_raw_string();
            else skip_quoted(src_[pos_]);
            return;
        }
        TokenClass kw = keyword_class(word);
        emit(out, kw ? kw : tok::kIdent);
    }

    void lex_operator(TokenStream& out) {
        for (std::size_t i = 0; i < kOperators.size(); ++i) {
            if (starts_with(kOperators[i].spelling)) {
                emit(out, kOperatorBase + i);
                pos_ += kOperators[i].spelling.size();
                return;
            }
        }
        if (src_[pos_] == '#') {
            emit(out, kHashClass);
        } else {
            emit(out, tok::kUnknown);
        }
        ++pos_;
    }
};

TokenStream tokenize_plain(std::string_view src) {
    TokenStream out;
    std::uint32_t line = 1;
    std::size_t pos = 0;
    while (pos < src.size()) {
        unsigned char c = static_cast<unsigned char>(src[pos]);
        if (std::isspace(c)) {
            if (c == '\n') ++line;
            ++pos;
            continue;
        }
        std::size_t start = pos;
        while (pos < src.size() && !std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
        out.tokens.push_back(fnv1a(src.substr(start, pos - start)));
        out.line_map.push_back(line);
    }
    return out;
}

}  // namespace

TokenClass keyword_class(std::string_view word) noexcept {
    auto it = std::lower_bound(kKeywords.begin(), kKeywords.end(), word);
    if (it != kKeywords.end() && *it == word) return kKeywordBase + static_cast<TokenClass>(it - kKeywords.begin());
    return 0;
}

TokenClass operator_class(std::string_view op) noexcept {
    for (std::size_t i = 0; i < kOperators.size(); ++i)
        if (kOperators[i].spelling == op) return kOperatorBase + i;
    if (op == kHash.spelling) return kHashClass;
    return 0;
}

std::string token_name(TokenClass t) {
    if (t & kWordBit) return "WORD";
    switch (t) {
        case tok::kIdent: return "IDENT";
        case tok::kNum: return "NUM";
        case tok::kStr: return "STR";
        case tok::kChar: return "CHAR";
        case tok::kUnknown: return "UNKNOWN";
        default: break;
    }
    if (t >= kKeywordBase && t < kKeywordBase + kKeywords.size()) return "KW_" + std::string(kKeywords[t - kKeywordBase]);
    if (t >= kOperatorBase && t < kOperatorBase + kOperators.size()) return std::string(kOperators[t - kOperatorBase].name);
    if (t == kHashClass) return std::string(kHash.name);
    return "?";
}

TokenStream tokenize(std::string_view source, Dialect dialect) {
    return dialect == Dialect::Plain ? tokenize_plain(source) : Lexer(source).run();
}

}  // namespace forkscope
