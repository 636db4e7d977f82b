package com.acme.shop.legacy;

class OldParser {
    static final String OPEN = "/* not a comment";
    static final char Q = '"';
    static final String BLOCK = """
        // @sketchlink 0f1c00000-0000-4000-8000-000000000098
        """;

    /** @sketchlink 0f1c00000-0000-4000-8000-000000000039 */
    int parse(String s) {
        return s.indexOf("*/");
    }
}
