package com.acme.shop;

public class Config {
    /** @sketchlink 0f1c00000-0000-4000-8000-000000000036 */ int retries = 3;

    /* @sketchlink 0f1c00000-0000-4000-8000-000000000037 */ void reload() {
        retries = 3;
    }
}
