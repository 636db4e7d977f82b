package com.acme.shop;

/** @sketchlink 0f1c00000-0000-4000-8000-000000000097 */
class Generated {
}
