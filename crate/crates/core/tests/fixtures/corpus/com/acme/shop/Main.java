package com.acme.shop;

public class Main {
    public static void main(String[] args) {
        run(args); /* starts the app
                      @sketchlink 0f1c00000-0000-4000-8000-000000000034 */
        System.exit(0);
    }

    static void run(String[] args) { /* @sketchlink 0f1c00000-0000-4000-8000-000000000035 */
        System.out.println(args.length);
    }
}
